"""Tests for run observables and report serialization."""

import pytest

from pbftsim.metrics import (Metrics, finalize, parse_report, read_report,
                             render_report, write_report)


class FakeEngine:
    def __init__(self, n, duration_s):
        self.n = n
        self.now_us = int(duration_s * 1_000_000)
        self.crashed = [False] * n
        self.dropped = [0] * n
        self.busy_cpu_us = [0] * n
        self.busy_nic_us = [0] * n
        self.sent_packets = 0


def small_report():
    metrics = Metrics(3)
    engine = FakeEngine(3, 120)
    metrics.record_commit(0, 1, 5, 30_000_000)
    metrics.record_commit(0, 2, 5, 90_000_000)
    metrics.record_commit(1, 1, 5, 31_000_000)
    metrics.record_retry(2)
    metrics.record_duplicate(1)
    engine.busy_cpu_us[0] = 30_000_000
    engine.busy_nic_us[0] = 6_000_000
    engine.dropped[2] = 4
    echo = {"nodes": 3, "seed": 42, "generation_period_s": 5.0}
    return finalize(metrics, engine, 120, echo)


class TestCollector:
    def test_commits_bin_by_minute(self):
        m = Metrics(2)
        m.record_commit(0, 1, 3, 59_999_999)
        m.record_commit(0, 2, 3, 60_000_000)
        m.record_commit(0, 3, 3, 60_000_001)
        assert m.minutes_series(0, 180) == [1, 2, 0]

    def test_observer_skips_crashed_nodes(self):
        m = Metrics(3)
        assert m.observer([False, False, False]) == 0
        assert m.observer([True, False, False]) == 1
        assert m.observer([True, True, False]) == 2

    def test_finalize_requires_finished_run(self):
        metrics = Metrics(2)
        engine = FakeEngine(2, 30)
        with pytest.raises(RuntimeError):
            finalize(metrics, engine, 60, {})


class TestReport:
    def test_summary_totals(self):
        report = small_report()
        assert report.total_committed == 2
        assert report.summary["committed_txs"] == "10"
        assert report.summary["retries_total"] == "1"
        assert report.minute_blocks == [1, 1]

    def test_per_node_rows(self):
        report = small_report()
        assert report.nodes[0]["load"] == pytest.approx(0.3)
        assert report.nodes[0]["blocks"] == 2
        assert report.nodes[2]["drops"] == 4
        assert report.nodes[1]["duplicates"] == 1

    def test_load_capped_at_one(self):
        metrics = Metrics(1)
        engine = FakeEngine(1, 60)
        engine.busy_cpu_us[0] = 100_000_000
        report = finalize(metrics, engine, 60, {})
        assert report.load(0) == 1.0

    def test_config_echo_serialized(self):
        report = small_report()
        assert report.summary["seed"] == "42"
        assert report.summary["generation_period_s"] == "5.000000"

    def test_avg_retries(self):
        report = small_report()
        assert report.avg_retries == pytest.approx(1 / 3)


class TestRoundTrip:
    def test_parse_inverts_render(self):
        report = small_report()
        text = render_report(report)
        assert parse_report(text) == report
        assert render_report(parse_report(text)) == text

    def test_file_round_trip(self, tmp_path):
        report = small_report()
        path = tmp_path / "run.out"
        write_report(report, path)
        assert read_report(path) == report

    def test_rejects_unknown_version(self):
        text = render_report(small_report())
        with pytest.raises(ValueError):
            parse_report(text.replace("report/1", "report/9"))

    def test_rejects_stray_content(self):
        with pytest.raises(ValueError):
            parse_report("not a report\n")
