"""Maximum-likelihood GLM fitting by iteratively reweighted least squares.

Also exposes the score vector, the empirical Fisher information
(1/n) X'WX, and the generalized hat matrix W^1/2 X (X'WX)^-1 X' W^1/2
needed by the grouped-residual covariance estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainEscapeError,
    FamilyDomainError,
    SingularInformationError,
    UnsupportedFamilyError,
)
from .families import (
    MEAN_FLOOR,
    POSITIVE_MEAN_FAMILIES,
    Family,
    Link,
    as_family,
    as_link,
    inverse_link,
    inverse_link_deriv,
    link_transform,
    validate_pair,
    variance_function,
)

# X'WX is deemed singular below this reciprocal condition estimate.
RCOND_SINGULAR = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Design matrix (intercept column included by the caller) and response."""

    design: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.asarray(self.response, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("design and response lengths differ")
        if not (X.shape[0] > X.shape[1] >= 1):
            raise ValueError("need n > d >= 1")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("non-finite entries in data")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]


@dataclass
class FittedModel:
    """Result of an IRLS fit."""

    beta: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    family: Family
    link: Link
    converged: bool
    iterations: int
    score_norm: float
    data: Dataset
    log_lik: float = field(default=float("nan"))


def _validate_response(family: Family, y: np.ndarray) -> None:
    kind = family.kind
    if kind == "bernoulli":
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("bernoulli response must be 0/1")
    elif kind in ("poisson", "negative_binomial"):
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise ValueError(f"{kind} response must be nonnegative integers")
    elif kind in ("gamma", "inverse_gaussian"):
        if np.any(y <= 0):
            raise ValueError(f"{kind} response must be positive")


def _mu_from_eta(family: Family, link: Link, eta: np.ndarray):
    """(ok, mu): mean values derived from eta, floored for positive-mean
    families; ok is False when an iterate leaves the mean domain."""
    mu = np.asarray(inverse_link(link, eta))
    if family.kind in POSITIVE_MEAN_FAMILIES:
        if np.any(mu < 0):
            return False, mu
        mu = np.maximum(mu, MEAN_FLOOR)
    return True, mu


def log_likelihood(family, y, mu) -> float:
    """Log-likelihood up to terms not involving the mean."""
    fam = as_family(family)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    kind = fam.kind
    if kind == "normal":
        return float(-0.5 * np.sum((y - mu) ** 2) / fam.dispersion)
    if kind == "bernoulli":
        return float(np.sum(y * np.log(mu) + (1.0 - y) * np.log1p(-mu)))
    if kind == "poisson":
        return float(np.sum(y * np.log(mu) - mu))
    if kind == "gamma":
        k = fam.dispersion
        return float(np.sum(k * (-np.log(mu) - y / mu)))
    if kind == "inverse_gaussian":
        lam = fam.dispersion
        return float(np.sum(-lam * (y - mu) ** 2 / (2.0 * mu * mu * y)))
    if kind == "negative_binomial":
        k = fam.dispersion
        return float(np.sum(y * np.log(mu) - (y + k) * np.log(mu + k)))
    raise UnsupportedFamilyError(kind)


def _rcond(a: np.ndarray) -> float:
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def score(data: Dataset, beta, family, link) -> np.ndarray:
    """Score vector sum_i x_i m'(eta_i) (y_i - mu_i) / v(mu_i)."""
    fam = as_family(family)
    lnk = as_link(link)
    eta = data.design @ np.asarray(beta, dtype=float)
    ok, mu = _mu_from_eta(fam, lnk, eta)
    if not ok:
        raise FamilyDomainError("mean outside family domain at this beta")
    md = np.asarray(inverse_link_deriv(lnk, eta))
    v = np.asarray(variance_function(fam, mu))
    return data.design.T @ (md * (data.response - mu) / v)


def fisher_information(data: Dataset, beta, family, link) -> np.ndarray:
    """Empirical Fisher information (1/n) X'WX, W = diag(m'(eta)^2 / v(mu))."""
    fam = as_family(family)
    lnk = as_link(link)
    eta = data.design @ np.asarray(beta, dtype=float)
    ok, mu = _mu_from_eta(fam, lnk, eta)
    if not ok:
        raise FamilyDomainError("mean outside family domain at this beta")
    md = np.asarray(inverse_link_deriv(lnk, eta))
    v = np.asarray(variance_function(fam, mu))
    w = md * md / v
    X = data.design
    return (X.T @ (w[:, None] * X)) / data.n


def hat_matrix(data: Dataset, model: FittedModel) -> np.ndarray:
    """Generalized hat matrix H = W^1/2 X (X'WX)^-1 X' W^1/2 (n x n).

    Materializes the full matrix; intended for diagnostics on small n.
    """
    md = np.asarray(inverse_link_deriv(model.link, model.eta))
    v = np.asarray(variance_function(model.family, model.mu))
    ws = md / np.sqrt(v)
    T = ws[:, None] * data.design
    u, s, _ = np.linalg.svd(T, full_matrices=False)
    if s[0] == 0.0 or s[-1] / s[0] < np.sqrt(RCOND_SINGULAR):
        raise SingularInformationError("weighted design is rank deficient")
    return u @ u.T


def fit_irls(
    data: Dataset,
    family,
    link,
    *,
    max_iter: int = 100,
    tol: float = 1e-8,
    initial_beta=None,
    initial_mu=None,
    allow_invalid_pair: bool = False,
) -> FittedModel:
    """Fit the GLM by Fisher scoring with step-halving.

    Convergence is declared on the sup-norm of the score. Non-convergence
    after ``max_iter`` returns a model with ``converged=False``; a step that
    cannot be halved back into the mean domain raises DomainEscapeError.
    """
    fam = as_family(family)
    lnk = as_link(link)
    if not allow_invalid_pair and not validate_pair(fam, lnk):
        raise UnsupportedFamilyError(
            f"{fam.kind}/{lnk.kind} is not a supported pair "
            "(pass allow_invalid_pair=True to override)"
        )
    X, y = data.design, data.response
    _validate_response(fam, y)

    if initial_beta is not None:
        beta = np.asarray(initial_beta, dtype=float)
        eta = X @ beta
        ok, mu = _mu_from_eta(fam, lnk, eta)
        if not ok:
            raise FamilyDomainError("initial_beta gives means outside the domain")
    else:
        beta = None
        if initial_mu is not None:
            mu0 = np.asarray(initial_mu, dtype=float)
        elif fam.kind == "bernoulli":
            mu0 = (y + 0.5) / 2.0
        elif fam.kind in POSITIVE_MEAN_FAMILIES:
            mu0 = np.maximum(y, 0.1)
        else:
            mu0 = y.astype(float)
        if lnk.kind in ("log", "sqrt"):
            mu0 = np.maximum(mu0, 0.1)
        eta = np.asarray(link_transform(lnk, mu0))
        ok, mu = _mu_from_eta(fam, lnk, eta)
        if not ok:
            raise FamilyDomainError("initialization gives means outside the domain")

    ll = log_likelihood(fam, y, mu)
    converged = False
    score_norm = float("inf")
    iterations = 0

    for _ in range(max_iter):
        v = np.asarray(variance_function(fam, mu))
        md = np.asarray(inverse_link_deriv(lnk, eta))
        md_safe = np.where(np.abs(md) < 1e-10, np.copysign(1e-10, md), md)
        w = md * md / v
        z = eta + (y - mu) / md_safe
        A = X.T @ (w[:, None] * X)
        if _rcond(A) < RCOND_SINGULAR:
            raise SingularInformationError("X'WX numerically singular")
        candidate = np.linalg.solve(A, X.T @ (w * z))

        # step-halving toward the previous iterate when the step leaves the
        # mean domain or lowers the log-likelihood; the first step has no
        # previous iterate (the start is a mean vector, not a beta) and is
        # accepted whenever it stays in the domain
        slack = 1e-10 * (1.0 + abs(ll))
        accepted = False
        for halving in range(21):
            eta_new = X @ candidate
            ok, mu_new = _mu_from_eta(fam, lnk, eta_new)
            ll_new = log_likelihood(fam, y, mu_new) if ok else -np.inf
            if ok and np.isfinite(ll_new) and (beta is None or ll_new >= ll - slack):
                accepted = True
                break
            if beta is None:
                raise DomainEscapeError("first iterate left the mean domain")
            if halving == 20:
                if not ok:
                    raise DomainEscapeError(
                        "step-halving failed to return to the mean domain"
                    )
                break  # in-domain but no improvement: keep previous iterate
            candidate = 0.5 * (candidate + beta)
        if not accepted:
            break

        beta, eta, mu, ll = candidate, eta_new, mu_new, ll_new
        iterations += 1
        sc = X.T @ _score_weights(lnk, eta, y, mu, fam)
        score_norm = float(np.max(np.abs(sc)))
        if score_norm <= tol:
            converged = True
            break

    if beta is None:
        raise SingularInformationError("no iteration performed")
    return FittedModel(
        beta=beta,
        eta=eta,
        mu=mu,
        family=fam,
        link=lnk,
        converged=converged,
        iterations=iterations,
        score_norm=score_norm,
        data=data,
        log_lik=ll,
    )


def _score_weights(link: Link, eta, y, mu, family: Family) -> np.ndarray:
    """Per-observation score weights m'(eta) (y - mu) / v(mu)."""
    md = np.asarray(inverse_link_deriv(link, eta))
    v = np.asarray(variance_function(family, mu))
    return md * (y - mu) / v
