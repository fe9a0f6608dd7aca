"""Grouping of observations on the linear-predictor scale.

Builds the (G+1)-vector of interval endpoints and the G x n group-indicator
matrix, either by the sequential variance-weighted quantile scheme, by equal
counts, or from user-supplied endpoints. Intervals are left-open and
right-closed, so an observation sitting exactly on an endpoint belongs to
the lower group.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleGroupingError
from .families import variance_function
from .fitting import FittedModel


@dataclass(frozen=True)
class GroupSpec:
    """Interval endpoints, indicator matrix, and per-group counts."""

    endpoints: np.ndarray  # length G+1, endpoints[0] = -inf, endpoints[-1] = +inf
    indicator: np.ndarray  # G x n matrix of 0/1 floats
    counts: np.ndarray  # group sizes n_g
    method: str
    warnings: tuple = field(default=())

    @property
    def n_groups(self) -> int:
        return self.indicator.shape[0]


@dataclass(frozen=True)
class GroupTable:
    """Per-group observed/expected summaries.

    O_g = sum of responses, E_g = sum of fitted means, V_g = sum of fitted
    variances, mean_fitted = E_g / n_g.
    """

    observed: np.ndarray
    expected: np.ndarray
    count: np.ndarray
    mean_fitted: np.ndarray
    variance: np.ndarray

    def to_rows(self) -> list:
        return [
            {
                "group": g + 1,
                "count": int(self.count[g]),
                "observed": float(self.observed[g]),
                "expected": float(self.expected[g]),
                "mean_fitted": float(self.mean_fitted[g]),
                "variance": float(self.variance[g]),
            }
            for g in range(self.count.size)
        ]


def group_indicators(eta, endpoints) -> np.ndarray:
    """G x n indicator matrix with entries 1(k_{g-1} < eta_i <= k_g)."""
    eta = np.asarray(eta, dtype=float)
    ends = np.asarray(endpoints, dtype=float)
    if ends.size < 2 or not np.isneginf(ends[0]) or not np.isposinf(ends[-1]):
        raise ValueError("endpoints must run from -inf to +inf")
    if np.any(np.diff(ends) <= 0):
        raise ValueError("endpoints must be strictly increasing")
    interior = ends[1:-1]
    idx = np.searchsorted(interior, eta, side="left")
    G = ends.size - 1
    ind = np.zeros((G, eta.size))
    ind[idx, np.arange(eta.size)] = 1.0
    return ind


def _sequential_endpoints(eta_sorted, w_sorted, G):
    """Interior endpoints of the sequential weighted-quantile scheme.

    Working from the top group down: the weighted (g-1)/g quantile of the
    remaining observations becomes the next endpoint and everything above it
    is peeled off. The quantile is the observed value whose cumulative weight
    is closest to the target fraction (ties toward the smaller value), which
    keeps the per-group weight sums balanced to within one observation's
    weight. When the quantile lands on the largest remaining value (a heavy
    upper tail), that value's observations are isolated instead and the
    endpoint is placed at the largest value below them.
    """
    warnings = []
    hi = eta_sorted.size
    interior = []
    for g in range(G, 1, -1):
        seg = eta_sorted[:hi]
        wseg = w_sorted[:hi]
        if seg[0] == seg[-1]:
            raise InfeasibleGroupingError(
                f"only one distinct linear predictor left while forming group {g}"
            )
        cw = np.cumsum(wseg)
        target = (g - 1) / g * cw[-1]
        k = int(np.searchsorted(cw, target, side="left"))  # first cum >= target
        if k > 0 and (target - cw[k - 1]) <= (cw[k] - target):
            k -= 1
        q = seg[k]
        j = int(np.searchsorted(seg, q, side="right"))
        if j == hi:
            # quantile hit the maximum; isolate its tie-group
            j = int(np.searchsorted(seg, q, side="left"))
            warnings.append(
                f"group {g}: endpoint moved below a heavy-weight maximum"
            )
            if j == 0:
                raise InfeasibleGroupingError(
                    f"cannot separate group {g}: ties at the maximum cover "
                    "all remaining observations"
                )
            interior.append(seg[j - 1])
        else:
            interior.append(q)
        hi = j
    interior.reverse()
    return np.asarray(interior, dtype=float), warnings


def _build_spec(eta, interior, method, warnings=()):
    eta = np.asarray(eta, dtype=float)
    endpoints = np.concatenate(([-np.inf], np.asarray(interior, dtype=float), [np.inf]))
    if np.any(np.diff(endpoints) <= 0):
        raise InfeasibleGroupingError("endpoints are not strictly increasing")
    ind = group_indicators(eta, endpoints)
    counts = ind.sum(axis=1).astype(int)
    if np.any(counts == 0):
        raise InfeasibleGroupingError(
            f"empty groups at endpoints {list(np.flatnonzero(counts == 0) + 1)}"
        )
    return GroupSpec(
        endpoints=endpoints,
        indicator=ind,
        counts=counts,
        method=method,
        warnings=tuple(warnings),
    )


def _weighted_spec(eta, weights, G, method):
    eta = np.asarray(eta, dtype=float)
    if G < 2:
        raise ValueError("need G >= 2 groups")
    if eta.size < G:
        raise ValueError("need at least G observations")
    order = np.argsort(eta, kind="stable")
    interior, warns = _sequential_endpoints(eta[order], weights[order], G)
    n_unique = np.unique(eta).size
    if n_unique < 0.9 * eta.size:
        warns = warns + ["many tied linear predictors; endpoint consistency "
                         "requires a continuous linear predictor"]
    return _build_spec(eta, interior, method, warns)


def variance_weighted_endpoints(model: FittedModel, G: int) -> GroupSpec:
    """Groups balancing the summed fitted variances via sequential weighted
    quantiles of the linear predictor."""
    w = np.asarray(variance_function(model.family, model.mu))
    return _weighted_spec(model.eta, w, G, "variance_weighted")


def equal_count_endpoints(model: FittedModel, G: int) -> GroupSpec:
    """Classic equal-count grouping (deciles of risk when G = 10)."""
    w = np.ones_like(model.eta)
    return _weighted_spec(model.eta, w, G, "equal_count")


def fixed_endpoints(model: FittedModel, interior) -> GroupSpec:
    """Groups from user-supplied interior endpoints."""
    interior = np.asarray(interior, dtype=float).ravel()
    if interior.size < 1:
        raise ValueError("need at least one interior endpoint")
    return _build_spec(model.eta, interior, "fixed")


def group_summaries(model: FittedModel, spec: GroupSpec) -> GroupTable:
    """Observed/expected/variance sums per group."""
    y = model.data.response
    mu = model.mu
    v = np.asarray(variance_function(model.family, mu))
    ind = spec.indicator
    observed = ind @ y
    expected = ind @ mu
    count = spec.counts.astype(float)
    return GroupTable(
        observed=observed,
        expected=expected,
        count=spec.counts.copy(),
        mean_fitted=expected / count,
        variance=ind @ v,
    )
