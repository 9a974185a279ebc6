import math

import pytest

from dsrl.selftest import (
    FAULTS,
    SuiteResult,
    format_report,
    run_selftest,
    suite_gradcheck,
    suite_lshad,
    suite_membership,
    suite_metrics,
    suite_roundtrip,
)


class TestSuiteResult:
    def test_record_tracks_worst_and_failures(self):
        r = SuiteResult("demo", tolerance=1e-3)
        r.record("a", 1e-5)
        r.record("b", 2e-3)
        r.record("b", 5e-3)
        assert r.checks == 3
        assert r.worst == 5e-3
        assert r.failures == ["b"]
        assert not r.passed

    def test_nan_is_a_failure(self):
        r = SuiteResult("demo", tolerance=1.0)
        r.record("x", math.nan)
        assert r.failures == ["x"] and r.worst == math.inf

    def test_line_format(self):
        r = SuiteResult("demo", tolerance=1e-9)
        r.record("x", 1e-12)
        line = r.line()
        assert line.startswith("[PASS] demo")
        assert "checks=1" in line and "worst=1.000e-12" in line


class TestSuites:
    def test_small_membership_passes(self):
        assert suite_membership(draws=200).passed

    def test_exp_map_fault_is_caught_by_name(self):
        r = suite_membership(draws=200, faults=("exp_map",))
        assert "exp_map" in r.failures
        assert "lift_from_euclidean" not in r.failures
        assert not suite_roundtrip(draws=50, faults=("exp_map",)).passed

    def test_lshad(self):
        r = suite_lshad(grid=30)
        assert r.passed and r.checks == 4

    def test_gradcheck_covers_layers(self):
        r = suite_gradcheck()
        assert r.passed
        assert r.checks >= 9

    def test_metrics(self):
        assert suite_metrics().passed

    def test_unknown_fault(self):
        with pytest.raises(ValueError):
            run_selftest(faults=("manifold",))

    def test_quick_report(self):
        results = run_selftest(quick=True)
        report = format_report(results)
        assert report.splitlines()[-1] == f"{len(results)}/{len(results)} suites passed"
        assert all(r.checks > 0 for r in results)
        assert FAULTS == ("exp_map",)
