import pytest

from statesecrecy.channel import ChannelLaw
from statesecrecy.suites import SUITE_NAMES, run_suite, suite_theorem1


class TestRunSuite:
    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown suite"):
            run_suite("nonsense")

    def test_registry_matches_names(self):
        results = run_suite("corollary1", seed=0)
        assert all(r.suite == "corollary1" for r in results)
        assert set(SUITE_NAMES) >= {r.suite for r in results}

    def test_as_dict_shape(self):
        result = run_suite("worst_case", seed=0)[0]
        d = result.as_dict()
        assert set(d) == {"suite", "check", "measured", "bound", "passed", "skipped", "detail"}


class TestTheorem1Vacuous:
    def test_traces_without_event_are_skipped_not_failed(self):
        # A channel on which the user never receives produces no critical
        # events: the bound makes no claim and the suite must say so
        # instead of failing.
        no_event = ChannelLaw.iid(p11=0.0, p10=0.0, p01=1.0, p00=0.0)
        results = suite_theorem1(seed=0, traces=3, law=no_event)
        assert all(r.skipped for r in results)
        assert all(r.passed for r in results)
        names = {r.name for r in results}
        assert names == {"exponential_lower_bound", "traces_without_critical_event"}

    def test_small_run_passes(self):
        results = suite_theorem1(seed=1, traces=20)
        bound = [r for r in results if r.name == "exponential_lower_bound"][0]
        assert bound.passed and not bound.skipped
        assert bound.measured >= -1e-9
