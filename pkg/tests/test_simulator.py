import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trainforge.core import ModuleKind
from trainforge.engine import replay
from trainforge.errors import DomainError
from trainforge.simulator import LatencyModel, TraineeProfile, load_profile, run_cohort, simulate
from trainforge.store import EventStore

from conftest import FIXTURES, live_only_scenario, scenario_strategy


def live_metrics(bundle):
    return next(s for s in bundle.metrics.per_subtask if s.module_kind is ModuleKind.LIVE)


class TestProfiles:
    def test_probability_bounds_enforced(self):
        with pytest.raises(DomainError):
            TraineeProfile(name="x", answer_accuracy=1.5, sequencing_fidelity=0.5)
        with pytest.raises(DomainError):
            TraineeProfile(name="x", answer_accuracy=0.5, sequencing_fidelity=-0.1)
        with pytest.raises(DomainError):
            LatencyModel(mean_s=0.0)

    def test_load_profile_file(self):
        profile = load_profile((FIXTURES / "profiles" / "novice.json").read_text())
        assert profile.name == "novice"
        assert profile.answer_accuracy == 0.55
        assert profile.latency_for(ModuleKind.MCQ).mean_s == 14.0
        # omitted kinds fall back to defaults
        bare = load_profile(json.dumps({"name": "p", "answer_accuracy": 1, "sequencing_fidelity": 1}))
        assert bare.latency_for(ModuleKind.LIVE).mean_s > 0


class TestSimulate:
    def test_perfect_profile_aces_everything(self, factory_scenario):
        profile = TraineeProfile(name="perfect", answer_accuracy=1.0, sequencing_fidelity=1.0)
        bundle = simulate(profile, factory_scenario, seed=5)
        live = live_metrics(bundle)
        assert live.vrtss == 1.0
        assert live.order_accuracy_x == 1.0 and live.action_correctness_y == 1.0
        assert all(s.success_rate == 1.0 for s in bundle.metrics.per_subtask)

    def test_zero_accuracy_gives_zero_y(self, factory_scenario):
        profile = TraineeProfile(name="lost", answer_accuracy=0.0, sequencing_fidelity=1.0)
        bundle = simulate(profile, factory_scenario, seed=5)
        live = live_metrics(bundle)
        assert live.action_correctness_y == 0.0
        assert live.vrtss == pytest.approx(0.3 * live.order_accuracy_x, abs=1e-12)

    def test_same_inputs_same_bundle(self, factory_scenario):
        profile = TraineeProfile(name="mid", answer_accuracy=0.6, sequencing_fidelity=0.6)
        assert simulate(profile, factory_scenario, seed=9) == simulate(profile, factory_scenario, seed=9)

    def test_different_profiles_get_different_sessions(self, factory_scenario):
        a = simulate(TraineeProfile(name="a", answer_accuracy=1, sequencing_fidelity=1), factory_scenario, seed=9)
        b = simulate(TraineeProfile(name="b", answer_accuracy=1, sequencing_fidelity=1), factory_scenario, seed=9)
        assert a.session_id != b.session_id

    def test_seed_fallback_to_profile(self, factory_scenario):
        profile = TraineeProfile(name="seeded", answer_accuracy=1, sequencing_fidelity=1, seed=31)
        assert simulate(profile, factory_scenario).seed == 31
        with pytest.raises(DomainError):
            simulate(TraineeProfile(name="bare", answer_accuracy=1, sequencing_fidelity=1), factory_scenario)

    def test_bundles_replay_cleanly(self, factory_scenario):
        # the simulator drives the real engine, so its logs replay verbatim
        rng = random.Random(4)
        for trial in range(10):
            profile = TraineeProfile(
                name=f"t{trial}",
                answer_accuracy=rng.random(),
                sequencing_fidelity=rng.random(),
                latency={
                    ModuleKind.LIVE: LatencyModel(mean_s=rng.uniform(5, 25), std_s=rng.uniform(0, 10)),
                },
            )
            bundle = simulate(profile, factory_scenario, seed=rng.getrandbits(32))
            assert replay(factory_scenario, bundle.events) == bundle.metrics

    def test_fuzzed_profiles_never_break_protocol(self):
        rng = random.Random(17)
        scenario = live_only_scenario(5)
        for trial in range(60):
            profile = TraineeProfile(
                name=f"fuzz{trial}",
                answer_accuracy=rng.random(),
                sequencing_fidelity=rng.random(),
                latency={ModuleKind.LIVE: LatencyModel(mean_s=rng.uniform(1, 40), std_s=rng.uniform(0, 15))},
            )
            bundle = simulate(profile, scenario, seed=rng.getrandbits(32))
            assert bundle.complete

    def test_timeouts_occur_for_slow_imperfect_profiles(self):
        scenario = live_only_scenario(5, time_limit=10.0)
        profile = TraineeProfile(
            name="slowpoke",
            answer_accuracy=0.3,
            sequencing_fidelity=1.0,
            latency={ModuleKind.LIVE: LatencyModel(mean_s=9.5, std_s=3.0)},
        )
        bundles = [simulate(profile, scenario, seed=s) for s in range(10)]
        completion = [s.completion_rate for b in bundles for s in b.metrics.per_subtask]
        assert min(completion) < 1.0  # the failure branch of the completion bit fires


class TestRunCohort:
    def test_perfect_cohort(self, factory_scenario, tmp_path):
        store = EventStore(tmp_path / "store")
        profile = TraineeProfile(name="perfect", answer_accuracy=1.0, sequencing_fidelity=1.0)
        report = run_cohort([profile], factory_scenario, n_per_profile=3, seed=10, store=store)
        assert report.subtasks["live"].vrtss_mean == pytest.approx(1.0)
        assert report.subtasks["live"].vrtss_std == 0.0

    def test_mixture_mean_between_solo_means(self, factory_scenario, tmp_path):
        novice = TraineeProfile(name="novice", answer_accuracy=0.3, sequencing_fidelity=0.4)
        expert = TraineeProfile(name="expert", answer_accuracy=0.98, sequencing_fidelity=0.98)
        solo = {}
        for profile in (novice, expert):
            store = EventStore(tmp_path / f"solo-{profile.name}")
            solo[profile.name] = run_cohort([profile], factory_scenario, 8, seed=10, store=store)
        mixed_store = EventStore(tmp_path / "mixed")
        mixed = run_cohort([novice, expert], factory_scenario, 8, seed=10, store=mixed_store)
        lo = solo["novice"].subtasks["live"].vrtss_mean
        hi = solo["expert"].subtasks["live"].vrtss_mean
        assert lo < mixed.subtasks["live"].vrtss_mean < hi

    def test_invalid_counts_rejected(self, factory_scenario, tmp_path):
        store = EventStore(tmp_path / "store")
        profile = TraineeProfile(name="p", answer_accuracy=1, sequencing_fidelity=1)
        with pytest.raises(DomainError):
            run_cohort([profile], factory_scenario, 0, seed=1, store=store)
        with pytest.raises(DomainError):
            run_cohort([], factory_scenario, 1, seed=1, store=store)


class TestArbitraryScenarios:
    @settings(max_examples=40, deadline=None)
    @given(
        scenario=scenario_strategy(),
        accuracy=st.floats(0, 1),
        fidelity=st.floats(0, 1),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_simulated_runs_replay_identically(self, scenario, accuracy, fidelity, seed):
        profile = TraineeProfile(name="gen", answer_accuracy=accuracy, sequencing_fidelity=fidelity)
        bundle = simulate(profile, scenario, seed=seed)
        assert bundle.complete
        assert replay(scenario, bundle.events) == bundle.metrics
