import json

import pytest

from trainforge.errors import MetricError
from trainforge.report import build_report, render_text
from trainforge.simulator import TraineeProfile, simulate
from trainforge.store import EventStore

from conftest import FIXTURES, Driver


@pytest.fixture()
def store(tmp_path):
    return EventStore(tmp_path / "store")


def store_driver_run(store, scenario, driver):
    metrics = driver.run_perfect()
    store.put_scenario(scenario)
    store.append_events(driver.session.session_id, driver.session.events)
    store.save_metrics(driver.session.session_id, metrics)
    return metrics


class TestBuildReport:
    def test_single_perfect_session(self, store, factory_scenario):
        store_driver_run(store, factory_scenario, Driver(factory_scenario, seed=5))
        report = build_report(store, scenario_id="factory-safety")
        live = report.subtasks["live"]
        assert live.vrtss_mean == pytest.approx(1.0)
        assert live.vrtss_std == 0.0
        assert live.vrtss_p_value is None
        assert any("singleton" in note for note in report.footnotes)
        assert any("degenerate" in note for note in report.footnotes)

    def test_empty_store_rejected(self, store):
        with pytest.raises(MetricError) as err:
            build_report(store)
        assert err.value.code == "empty-cohort"

    def test_incomplete_sessions_excluded(self, store, factory_scenario):
        store_driver_run(store, factory_scenario, Driver(factory_scenario, seed=5))
        partial = Driver(factory_scenario, seed=6)
        partial.start()
        partial.answer_current()
        store.append_events(partial.session.session_id, partial.session.events)
        report = build_report(store, scenario_id="factory-safety")
        assert len(report.session_ids) == 1
        assert any("excluded" in note for note in report.footnotes)

    def test_stored_metrics_mismatch_is_flagged(self, store, factory_scenario):
        metrics = store_driver_run(store, factory_scenario, Driver(factory_scenario, seed=5))
        session_id = metrics.session_id
        metrics_path = store._dirs[session_id] / "metrics.json"
        tampered = json.loads(metrics_path.read_text())
        tampered["engagement_frequency"] = 9.99
        metrics_path.write_text(json.dumps(tampered))
        fresh = EventStore(store.root)
        report = build_report(fresh, scenario_id="factory-safety")
        assert report.mismatched_sessions == (session_id,)
        # the recomputed value wins
        assert report.columns["engagement_per_s"].mean != pytest.approx(9.99)

    def test_version_filter(self, store, factory_scenario):
        store_driver_run(store, factory_scenario, Driver(factory_scenario, seed=5))
        report = build_report(store, scenario_id="factory-safety", version=1)
        assert len(report.session_ids) == 1
        with pytest.raises(MetricError):
            build_report(store, scenario_id="factory-safety", version=2)

    def test_cohort_a_fixture_builds(self):
        store = EventStore(FIXTURES / "cohort-A")
        report = build_report(store, scenario_id="factory-safety")
        assert len(report.session_ids) == 5
        assert report.mismatched_sessions == ()
        assert set(report.subtasks) == {"mcq", "iq", "live"}
        for name in ("mcq_success_rate", "live_vrtss", "engagement_per_s", "total_duration_s"):
            assert report.columns[name].count == 5


class TestRendering:
    def test_text_shape(self):
        store = EventStore(FIXTURES / "cohort-A")
        report = build_report(store, scenario_id="factory-safety")
        text = render_text(report)
        header = next(line for line in text.splitlines() if "count" in line)
        for stat in ["count", "mean", "std", "min", "25%", "50%", "75%", "max"]:
            assert stat in header
        for row in ["VRTSS mean", "VRTSS std", "VRTSS P-Value", "Success Rate (%)"]:
            assert row in text
        for heading in ["MCQ", "Interactive", "LiveScenario"]:
            assert heading in text

    def test_percent_cells_use_table_format(self):
        store = EventStore(FIXTURES / "cohort-A")
        report = build_report(store, scenario_id="factory-safety")
        text = render_text(report)
        success_line = next(line for line in text.splitlines() if line.startswith("Success Rate"))
        assert "%" in success_line
        assert "64.00%" in success_line

    def test_machine_export_round_trips_through_json(self):
        store = EventStore(FIXTURES / "cohort-A")
        report = build_report(store, scenario_id="factory-safety")
        blob = json.dumps(report.to_dict())
        parsed = json.loads(blob)
        assert parsed["subtasks"]["live"]["vrtss_mean"] == pytest.approx(report.subtasks["live"].vrtss_mean)
        assert parsed["columns"]["live_vrtss"]["count"] == 5
        assert parsed["subtasks"]["mcq"]["success_rate_pct"].endswith("%")


class TestMultiProfileCohort:
    def test_report_covers_simulated_without_stored_metrics(self, store, factory_scenario):
        # metrics.json is optional: report recomputes from events
        bundle = simulate(
            TraineeProfile(name="solo", answer_accuracy=0.7, sequencing_fidelity=0.8),
            factory_scenario,
            seed=12,
        )
        store.put_scenario(factory_scenario)
        store.append_events(bundle.session_id, bundle.events)
        report = build_report(store)
        assert report.session_ids == (bundle.session_id,)
