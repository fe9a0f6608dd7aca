"""Shared numerical kernels.

SVD-based Moore-Penrose pseudoinverse with rank determination, the
chi-squared survival function via the regularized incomplete gamma function,
and type-1 (inverse-CDF) weighted quantiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Absolute floor on the singular-value cutoff.
_TOL_FLOOR = 1e-10


@dataclass(frozen=True)
class PseudoinverseResult:
    """Pseudoinverse of a symmetric matrix together with rank diagnostics.

    Attributes
    ----------
    pinv : ndarray
        Moore-Penrose pseudoinverse, symmetrized.
    rank : int
        Number of singular values above ``tolerance_used``.
    singular_values : ndarray
        Singular values in nonincreasing order.
    tolerance_used : float
        The absolute cutoff actually applied.
    """

    pinv: np.ndarray
    rank: int
    singular_values: np.ndarray
    tolerance_used: float


def pseudoinverse(a, rel_tol=None, abs_tol=None) -> PseudoinverseResult:
    """Moore-Penrose pseudoinverse of a square symmetric matrix.

    Parameters
    ----------
    a : (G, G) array_like
        Symmetric matrix (within 1e-8); it is symmetrized as (A + A')/2
        before decomposition.
    rel_tol : float, optional
        Relative cutoff; singular values <= rel_tol * s_max are treated as
        zero. Defaults to G * machine epsilon. An absolute floor of 1e-10 is
        always applied.
    abs_tol : float, optional
        Absolute eigenvalue trimming threshold; overrides ``rel_tol`` when
        given.
    """
    A = np.asarray(a, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("pseudoinverse expects a square matrix")
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 0.0)
    if float(np.max(np.abs(A - A.T))) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric within 1e-8")
    S = 0.5 * (A + A.T)
    u, s, vt = np.linalg.svd(S)
    if abs_tol is not None:
        tol = float(abs_tol)
    else:
        rt = A.shape[0] * np.finfo(float).eps if rel_tol is None else float(rel_tol)
        smax = float(s[0]) if s.size else 0.0
        tol = max(rt * smax, _TOL_FLOOR)
    keep = s > tol
    rank = int(np.count_nonzero(keep))
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    P = (vt.T * inv_s) @ u.T
    P = 0.5 * (P + P.T)
    return PseudoinverseResult(pinv=P, rank=rank, singular_values=s,
                               tolerance_used=tol)


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by series; valid x < a + 1."""
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(1000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_sq_sf(x, df) -> float:
    """P(chi-squared with ``df`` degrees of freedom > x)."""
    if df < 1 or int(df) != df:
        raise ValueError("df must be a positive integer")
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    a = 0.5 * df
    xx = 0.5 * x
    if xx == 0.0:
        return 1.0
    if xx < a + 1.0:
        return 1.0 - _lower_gamma_series(a, xx)
    return _upper_gamma_cf(a, xx)


def chi_sq_cdf(x, df) -> float:
    """P(chi-squared with ``df`` degrees of freedom <= x)."""
    if df < 1 or int(df) != df:
        raise ValueError("df must be a positive integer")
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    a = 0.5 * df
    xx = 0.5 * x
    if xx == 0.0:
        return 0.0
    if xx < a + 1.0:
        return _lower_gamma_series(a, xx)
    return 1.0 - _upper_gamma_cf(a, xx)


def weighted_quantile(values, weights, p) -> float:
    """Smallest value whose cumulative normalized weight reaches ``p``.

    ``values`` must be sorted ascending and ``weights`` positive.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.size == 0:
        raise ValueError("empty input")
    if v.shape != w.shape or v.ndim != 1:
        raise ValueError("values and weights must be 1-d and equally long")
    if np.any(np.diff(v) < 0):
        raise ValueError("values must be sorted ascending")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    cw = np.cumsum(w)
    idx = int(np.searchsorted(cw, p * cw[-1], side="left"))
    return float(v[min(idx, v.size - 1)])
