import math
import warnings

import numpy as np
import pytest

from trafficpred.entropy import real_entropy_lz
from trafficpred.synth import (
    DEFAULT_PROFILE,
    DEPENDENT_PROFILE,
    InvalidProfile,
    InvalidStochasticMatrix,
    MarkovSource,
    PopulationProfile,
    ReducibleChainWarning,
    analytic_entropy_rate,
    analytic_optimal_accuracy,
    generate_sequence,
    generate_traffic_population,
)


def flip_chain(p_flip, seed=0):
    t = np.array([[1 - p_flip, p_flip], [p_flip, 1 - p_flip]])
    return MarkovSource(t, np.array([0.5, 0.5]), seed=seed)


class TestMarkovSource:
    def test_rows_must_sum_to_one(self):
        with pytest.raises(InvalidStochasticMatrix):
            MarkovSource(np.array([[0.5, 0.4], [0.5, 0.5]]), np.array([0.5, 0.5]), 0)

    def test_entries_must_be_non_negative(self):
        with pytest.raises(InvalidStochasticMatrix):
            MarkovSource(np.array([[1.5, -0.5], [0.5, 0.5]]), np.array([0.5, 0.5]), 0)

    def test_initial_must_match(self):
        with pytest.raises(InvalidStochasticMatrix):
            MarkovSource(np.eye(2), np.array([1.0]), 0)


class TestGenerateSequence:
    def test_identity_matrix_freezes_state(self):
        src = MarkovSource(np.eye(3), np.array([0.0, 1.0, 0.0]), seed=5)
        seq = generate_sequence(src, 50)
        assert set(seq.states.tolist()) == {1}

    def test_permutation_matrix_cycles(self):
        t = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        src = MarkovSource(t, np.array([1.0, 0.0, 0.0]), seed=1)
        seq = generate_sequence(src, 9)
        assert seq.states.tolist() == [0, 1, 2, 0, 1, 2, 0, 1, 2]

    def test_deterministic_for_fixed_seed(self):
        src = flip_chain(0.3, seed=11)
        a = generate_sequence(src, 500).states
        b = generate_sequence(src, 500).states
        assert np.array_equal(a, b)

    def test_flip_rate_matches_parameter(self):
        seq = generate_sequence(flip_chain(0.1, seed=3), 100_000)
        flips = np.mean(seq.states[1:] != seq.states[:-1])
        assert flips == pytest.approx(0.1, abs=0.01)


class TestAnalyticQuantities:
    def test_identity_chain_zero_entropy(self):
        src = MarkovSource(np.eye(4), np.full(4, 0.25), seed=0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ReducibleChainWarning)
            assert analytic_entropy_rate(src) == pytest.approx(0.0)
            assert analytic_optimal_accuracy(src) == pytest.approx(1.0)

    def test_uniform_iid_rows(self):
        src = MarkovSource(np.full((4, 4), 0.25), np.full(4, 0.25), seed=0)
        assert analytic_entropy_rate(src) == pytest.approx(2.0, abs=1e-10)
        assert analytic_optimal_accuracy(src) == pytest.approx(0.25, abs=1e-10)

    def test_flip_chain_binary_entropy(self):
        expected = -(0.1 * math.log2(0.1) + 0.9 * math.log2(0.9))
        assert analytic_entropy_rate(flip_chain(0.1)) == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(0.4690, abs=1e-4)
        assert analytic_optimal_accuracy(flip_chain(0.1)) == pytest.approx(0.9, abs=1e-10)

    def test_permutation_chain_fully_predictable(self):
        t = np.array([[0.0, 1.0], [1.0, 0.0]])
        src = MarkovSource(t, np.array([1.0, 0.0]), seed=0)
        assert analytic_optimal_accuracy(src) == pytest.approx(1.0)

    def test_reducible_chain_warns_and_uses_reachable_classes(self):
        # state 0 is transient: it leaks into the closed classes {1} and {2}
        t = np.array([
            [0.0, 0.5, 0.5],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        src = MarkovSource(t, np.array([1.0, 0.0, 0.0]), seed=0)
        with pytest.warns(ReducibleChainWarning):
            rate = analytic_entropy_rate(src)
        assert rate == pytest.approx(0.0)
        with pytest.warns(ReducibleChainWarning):
            acc = analytic_optimal_accuracy(src)
        assert acc == pytest.approx(1.0)

    def test_lz_estimator_tracks_analytic_rate_on_chain_grid(self):
        rng = np.random.default_rng(2024)
        for n_states in (2, 4, 8):
            p = rng.dirichlet(np.ones(n_states), size=n_states)
            src = MarkovSource(p, np.full(n_states, 1 / n_states), seed=int(rng.integers(1 << 30)))
            est = real_entropy_lz(generate_sequence(src, 100_000))
            assert est == pytest.approx(analytic_entropy_rate(src), abs=0.1)


class TestPopulationProfile:
    def test_autocorr_range_enforced(self):
        with pytest.raises(InvalidProfile):
            PopulationProfile(autocorr=1.0)

    def test_negative_p90_rejected(self):
        with pytest.raises(InvalidProfile):
            PopulationProfile(p90_seconds=-1)

    def test_zero_fraction_range(self):
        with pytest.raises(InvalidProfile):
            PopulationProfile(zero_day_fraction=0.95)


class TestGenerateTrafficPopulation:
    def test_deterministic_for_fixed_seed(self):
        a = generate_traffic_population(DEFAULT_PROFILE, 20, 60, seed=4)
        b = generate_traffic_population(DEFAULT_PROFILE, 20, 60, seed=4)
        assert a.keys() == b.keys()
        for user in a:
            assert np.array_equal(a[user].values, b[user].values)

    def test_different_seeds_differ(self):
        a = generate_traffic_population(DEFAULT_PROFILE, 5, 60, seed=1)
        b = generate_traffic_population(DEFAULT_PROFILE, 5, 60, seed=2)
        assert any(
            not np.array_equal(a[user].values, b[user].values) for user in a
        )

    def test_series_shape_and_window(self):
        pop = generate_traffic_population(DEFAULT_PROFILE, 7, 184, seed=0)
        assert len(pop) == 7
        for series in pop.values():
            assert len(series.values) == 184
            assert series.window.day_count == 184
            assert np.all(series.values >= 0)

    def test_all_zero_profile(self):
        profile = PopulationProfile(p90_seconds=0.0)
        pop = generate_traffic_population(profile, 5, 30, seed=9)
        for series in pop.values():
            assert not series.values.any()

    def test_pooled_percentile_hits_target(self):
        # 10^4 users is the acceptance-scale check; 2000 here keeps the
        # unit suite quick while staying well inside the 5% band
        pop = generate_traffic_population(DEFAULT_PROFILE, 2000, 184, seed=12)
        pooled = np.concatenate([s.values for s in pop.values()])
        p90 = np.percentile(pooled, 90)
        assert abs(p90 - 3780) / 3780 < 0.05

    def test_values_capped(self):
        profile = PopulationProfile(sigma=3.0, max_seconds=80204)
        pop = generate_traffic_population(profile, 300, 184, seed=3)
        top = max(int(s.values.max()) for s in pop.values())
        assert top <= 80204

    def test_dependent_profile_is_strongly_predictable(self):
        from trafficpred.entropy import entropy_report
        from trafficpred.predictability import predictability_report
        from trafficpred.quantizer import QuantizationConfig, quantize_values

        pop = generate_traffic_population(DEPENDENT_PROFILE, 50, 184, seed=0)
        pis = []
        for series in pop.values():
            seq = quantize_values(series.values, QuantizationConfig(600))
            pis.append(predictability_report(entropy_report(seq)).pi_max)
        assert float(np.mean(pis)) > 0.9
