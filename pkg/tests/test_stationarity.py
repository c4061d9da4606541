import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trafficpred.stationarity import (
    AdfResult,
    ConstantSeries,
    EmptyCollection,
    SeriesTooShort,
    adf_test,
    default_max_lag,
    mackinnon_pvalue,
    stationary_fraction,
)

FIXTURES = Path(__file__).parent / "fixtures"


def load_reference():
    with open(FIXTURES / "adf_reference.json") as fh:
        return json.load(fh)["series"]


def series_for(entry):
    rng = np.random.default_rng(entry["seed"])
    draws = rng.standard_normal(entry["n"])
    if entry["kind"] == "white_noise":
        return draws
    return np.cumsum(draws)


class TestAgainstReferenceImplementation:
    @pytest.mark.parametrize("entry", load_reference(), ids=lambda e: f"{e['kind']}-{e['seed']}")
    def test_t_statistic_matches_fixture(self, entry):
        result = adf_test(series_for(entry))
        assert result.t_statistic == pytest.approx(entry["t_stat"], abs=1e-3)

    @pytest.mark.parametrize("entry", load_reference(), ids=lambda e: f"{e['kind']}-{e['seed']}")
    def test_lag_selection_matches_fixture(self, entry):
        assert adf_test(series_for(entry)).lags_used == entry["lags"]

    @pytest.mark.parametrize("entry", load_reference(), ids=lambda e: f"{e['kind']}-{e['seed']}")
    def test_p_value_matches_fixture(self, entry):
        result = adf_test(series_for(entry))
        ref = entry["p_value"]
        if ref < 1e-12:
            assert result.p_value == pytest.approx(ref, rel=1e-2)
        else:
            assert result.p_value == pytest.approx(ref, abs=1e-6)


class TestAdfBehaviour:
    def test_white_noise_strongly_rejects(self):
        x = np.random.default_rng(42).standard_normal(184)
        result = adf_test(x)
        assert result.p_value < 0.01
        assert result.stationary_at[0.01]
        assert result.is_stationary(0.01)

    def test_random_walk_fails_to_reject(self):
        x = np.cumsum(np.random.default_rng(43).standard_normal(184))
        result = adf_test(x)
        assert result.p_value > 0.05
        assert not result.stationary_at[0.05]

    def test_short_series_rejected(self):
        with pytest.raises(SeriesTooShort):
            adf_test(np.ones(11) + np.arange(11))

    def test_constant_series_rejected(self):
        with pytest.raises(ConstantSeries):
            adf_test(np.full(50, 7.0))

    def test_deep_tail_p_values_reachable(self):
        # white noise at this length lands far in the left tail, where the
        # response surface still produces meaningful tiny p-values
        rng = np.random.default_rng(7)
        x = rng.standard_normal(184)
        result = adf_test(x, max_lag=0)
        assert 0.0 < result.p_value < 1e-15
        assert not result.p_clamped

    def test_statistic_beyond_surface_clamps_to_zero(self):
        rng = np.random.default_rng(7)
        result = adf_test(rng.standard_normal(400), max_lag=0)
        assert result.p_value == 0.0
        assert result.p_clamped

    @given(st.floats(0.1, 1e6), st.integers(0, 4))
    @settings(max_examples=60, deadline=None)
    def test_scale_invariance(self, scale, seed):
        x = np.random.default_rng(seed).standard_normal(120)
        base = adf_test(x)
        scaled = adf_test(x * scale)
        assert scaled.t_statistic == pytest.approx(base.t_statistic, abs=1e-9)

    @given(st.floats(-1e6, 1e6), st.integers(0, 4))
    @settings(max_examples=60, deadline=None)
    def test_shift_invariance(self, shift, seed):
        x = np.random.default_rng(seed).standard_normal(120)
        base = adf_test(x)
        shifted = adf_test(x + shift)
        assert shifted.t_statistic == pytest.approx(base.t_statistic, abs=1e-9)

    def test_default_max_lag_follows_sample_size_rule(self):
        assert default_max_lag(100) == 12
        assert default_max_lag(184) == 14


class TestMacKinnonSurface:
    def test_clamps_and_flags_outside_validity(self):
        assert mackinnon_pvalue(-25.0) == (0.0, True)
        assert mackinnon_pvalue(5.0) == (1.0, True)

    def test_interior_is_unclamped(self):
        p, clamped = mackinnon_pvalue(-2.86)
        assert not clamped
        assert p == pytest.approx(0.05, abs=0.002)

    def test_monotone_in_statistic(self):
        # non-decreasing p as t grows; the small/large polynomial seam at
        # -1.61 is allowed a whisker of slack
        grid = np.linspace(-18.8, 2.7, 4001)
        values = [mackinnon_pvalue(t)[0] for t in grid]
        diffs = np.diff(values)
        assert diffs.min() >= -2e-3
        interior = [i for i, t in enumerate(grid[:-1]) if abs(t - (-1.61)) > 0.02]
        assert min(diffs[i] for i in interior) >= 0.0


class TestStationaryFraction:
    def result_with_p(self, p):
        return AdfResult(
            t_statistic=-3.0, p_value=p, lags_used=0,
            stationary_at={0.05: p < 0.05, 0.01: p < 0.01},
        )

    def test_all_below(self):
        results = [self.result_with_p(0.001)] * 4
        assert stationary_fraction(results, alpha=0.01) == 1.0

    def test_half_below(self):
        results = [self.result_with_p(0.001), self.result_with_p(0.5)]
        assert stationary_fraction(results, alpha=0.01) == 0.5

    def test_empty_errors(self):
        with pytest.raises(EmptyCollection):
            stationary_fraction([], alpha=0.05)

    def test_power_on_stationary_ar1_population(self):
        # the test should flag nearly all mildly autocorrelated stationary
        # series at this sample size
        rng = np.random.default_rng(99)
        results = []
        for _ in range(300):
            eps = rng.standard_normal(184)
            x = np.empty(184)
            x[0] = eps[0]
            for t in range(1, 184):
                x[t] = 0.5 * x[t - 1] + eps[t]
            results.append(adf_test(x))
        assert stationary_fraction(results, alpha=0.01) >= 0.9
