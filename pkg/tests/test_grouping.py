import numpy as np
import pytest

from glmgof import (
    Dataset,
    FittedModel,
    InfeasibleGroupingError,
    equal_count_endpoints,
    fit_irls,
    fixed_endpoints,
    group_indicators,
    group_summaries,
    variance_function,
    variance_weighted_endpoints,
)
from glmgof.families import Family, Link
from glmgof.grouping import _sequential_endpoints


def model_from_eta(eta, y, family="poisson", link="log", mu=None):
    """FittedModel built directly from linear predictors (design is [1, eta])."""
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    from glmgof.families import inverse_link
    mu = np.asarray(inverse_link(link, eta)) if mu is None else np.asarray(mu)
    data = Dataset(np.column_stack([np.ones(eta.size), eta]), y)
    return FittedModel(
        beta=np.array([0.0, 1.0]), eta=eta, mu=mu,
        family=Family(family) if isinstance(family, str) else family,
        link=Link(link), converged=True, iterations=1, score_norm=0.0,
        data=data, log_lik=0.0,
    )


class TestSequentialScheme:
    def test_uniform_weights_reduce_to_equal_counts(self):
        eta = np.arange(10.0)
        interior, warns = _sequential_endpoints(eta, np.ones(10), 5)
        assert list(interior) == [1.0, 3.0, 5.0, 7.0]
        assert warns == []

    def test_heavy_observation_isolated(self):
        # hand-executed: the weight-9 observation at the top gets its own
        # group; the rest split 3/4/4
        eta = np.arange(12.0)
        w = np.ones(12)
        w[-1] = 9.0
        interior, _ = _sequential_endpoints(eta, w, 4)
        assert list(interior) == [2.0, 6.0, 10.0]
        idx = np.searchsorted(interior, eta, side="left")
        assert list(np.bincount(idx)) == [3, 4, 4, 1]
        assert list(np.bincount(idx, weights=w)) == [3.0, 4.0, 4.0, 9.0]

    def test_g_of_one_rejected(self):
        m = model_from_eta(np.arange(10.0), np.ones(10))
        with pytest.raises(ValueError):
            variance_weighted_endpoints(m, 1)

    def test_more_groups_than_observations_rejected(self):
        m = model_from_eta(np.arange(4.0), np.ones(4))
        with pytest.raises(ValueError):
            variance_weighted_endpoints(m, 5)

    def test_all_tied_eta_is_infeasible(self):
        m = model_from_eta(np.zeros(8), np.ones(8))
        with pytest.raises(InfeasibleGroupingError):
            variance_weighted_endpoints(m, 2)

    def test_two_distinct_values_cannot_make_three_groups(self):
        m = model_from_eta([0.0, 0.0, 1.0, 1.0], np.ones(4))
        with pytest.raises(InfeasibleGroupingError):
            equal_count_endpoints(m, 3)

    def test_deterministic(self):
        rng = np.random.default_rng(64)
        eta = rng.normal(size=50)
        m = model_from_eta(eta, np.ones(50))
        a = variance_weighted_endpoints(m, 10)
        b = variance_weighted_endpoints(m, 10)
        assert np.array_equal(a.endpoints, b.endpoints)

    def test_row_order_does_not_matter(self):
        rng = np.random.default_rng(65)
        eta = rng.normal(size=40)
        m1 = model_from_eta(eta, np.ones(40))
        perm = rng.permutation(40)
        m2 = model_from_eta(eta[perm], np.ones(40))
        a = variance_weighted_endpoints(m1, 5)
        b = variance_weighted_endpoints(m2, 5)
        assert np.allclose(a.endpoints, b.endpoints)

    def test_ties_never_straddle_an_endpoint(self):
        eta = np.repeat([0.0, 1.0, 2.0, 3.0, 4.0], 4)
        m = model_from_eta(eta, np.ones(20))
        spec = equal_count_endpoints(m, 5)
        for value in np.unique(eta):
            cols = spec.indicator[:, eta == value]
            assert np.all(cols == cols[:, :1])


class TestGroupIndicators:
    def test_right_closed_boundary(self):
        ind = group_indicators([-1.0, 0.0, 1.0], [-np.inf, 0.0, np.inf])
        assert np.array_equal(ind, [[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    def test_columns_sum_to_one(self):
        rng = np.random.default_rng(2)
        eta = rng.normal(size=100)
        ind = group_indicators(eta, [-np.inf, -0.5, 0.2, 0.9, np.inf])
        assert np.array_equal(ind.sum(axis=0), np.ones(100))

    def test_one_per_group(self):
        ind = group_indicators([0.5, 1.5, 2.5, 3.5],
                               [-np.inf, 1.0, 2.0, 3.0, np.inf])
        assert np.array_equal(ind, np.eye(4))

    def test_rejects_bad_endpoints(self):
        with pytest.raises(ValueError):
            group_indicators([0.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            group_indicators([0.0], [-np.inf, 1.0, 1.0, np.inf])


class TestGroupSummaries:
    def test_hand_computed_eight_rows(self):
        eta = np.array([0.0, 0.1, 0.2, 0.3, 1.0, 1.1, 1.2, 1.3])
        y = np.array([1.0, 1.0, 2.0, 1.0, 3.0, 2.0, 4.0, 3.0])
        m = model_from_eta(eta, y)
        spec = fixed_endpoints(m, [0.65])
        tab = group_summaries(m, spec)
        assert np.array_equal(tab.observed, [5.0, 12.0])
        assert tab.expected[0] == pytest.approx(4.676432483811821, abs=1e-12)
        assert tab.expected[1] == pytest.approx(12.71186144276127, abs=1e-12)
        assert np.array_equal(tab.count, [4, 4])
        assert np.allclose(tab.variance, tab.expected)  # poisson: V_g = E_g
        assert np.allclose(tab.mean_fitted, tab.expected / 4.0)

    def test_perfect_fit_observed_equals_expected(self):
        eta = np.linspace(-1.0, 1.0, 12)
        mu = np.exp(eta)
        m = model_from_eta(eta, y=mu)
        spec = equal_count_endpoints(m, 3)
        tab = group_summaries(m, spec)
        assert np.allclose(tab.observed, tab.expected)

    def test_totals_are_preserved(self):
        rng = np.random.default_rng(42)
        eta = rng.normal(size=60)
        y = rng.poisson(np.exp(eta)).astype(float)
        m = model_from_eta(eta, y)
        spec = variance_weighted_endpoints(m, 6)
        tab = group_summaries(m, spec)
        assert tab.observed.sum() == pytest.approx(y.sum())
        assert tab.expected.sum() == pytest.approx(m.mu.sum())
        assert tab.count.sum() == 60


class TestPartitionInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_random_fits(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(50, 150))
        x = rng.uniform(-3.0, 3.0, n)
        y = rng.poisson(np.exp(1.0 + 0.5 * x)).astype(float)
        data = Dataset(np.column_stack([np.ones(n), x]), y)
        m = fit_irls(data, "poisson", "log")
        spec = variance_weighted_endpoints(m, 10)
        assert np.array_equal(spec.indicator.sum(axis=0), np.ones(n))
        assert np.array_equal(spec.indicator.sum(axis=1), spec.counts)
        assert spec.counts.sum() == n
        assert np.all(spec.counts >= 1)
        # weight balance up to one observation's weight
        w = np.asarray(variance_function(m.family, m.mu))
        Vg = spec.indicator @ w
        assert Vg.max() - Vg.min() <= w.max() + 1e-9

    def test_fixed_endpoints_empty_group_raises(self):
        m = model_from_eta(np.linspace(0.0, 1.0, 10), np.ones(10))
        with pytest.raises(InfeasibleGroupingError):
            fixed_endpoints(m, [5.0, 6.0])
