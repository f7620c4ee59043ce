/** Client-rendered countdown. Authority over timeouts stays with the server;
 * expiry here only disables input while the service's timeout confirmation
 * is awaited. Remaining time is clamped at zero, never negative. */
export class Countdown {
  private timer: ReturnType<typeof setInterval> | null = null;
  private deadline = 0;
  private expired = false;

  constructor(
    private readonly now: () => number = () => Date.now() / 1000,
    private readonly tickMs = 100,
  ) {}

  start(seconds: number, onTick: (remaining: number) => void, onExpire: () => void): void {
    this.stop();
    this.deadline = this.now() + Math.max(0, seconds);
    this.expired = false;
    const tick = () => {
      const remaining = this.remaining();
      onTick(remaining);
      if (remaining <= 0 && !this.expired) {
        this.expired = true;
        this.stop();
        onExpire();
      }
    };
    this.timer = setInterval(tick, this.tickMs);
    tick();
  }

  remaining(): number {
    return Math.max(0, this.deadline - this.now());
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
