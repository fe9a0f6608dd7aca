"""Exponential-dispersion families and link functions.

Defines the family algebra (variance function, dispersion handling), the
seven inverse links with their derivatives, the table of supported
family/link pairs, and parametric response samplers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import FamilyDomainError, UnsupportedFamilyError

FAMILY_KINDS = (
    "normal",
    "bernoulli",
    "poisson",
    "gamma",
    "inverse_gaussian",
    "negative_binomial",
)
LINK_KINDS = ("identity", "log", "logit", "probit", "cauchit", "cloglog", "sqrt")

# Families whose mean domain is the positive half-line.
POSITIVE_MEAN_FAMILIES = frozenset(
    {"poisson", "gamma", "inverse_gaussian", "negative_binomial"}
)

# Floor applied to fitted means of positive-mean families before variance
# evaluation (the square-root link can produce exact zeros).
MEAN_FLOOR = 1e-10

# Clamp keeping bounded-link means strictly inside (0, 1) in float64.
_P_LO = 1e-16
_P_HI = 1.0 - 1e-16

# Supported family/link combinations.
VALID_PAIRS = {
    "normal": frozenset({"identity"}),
    "bernoulli": frozenset({"logit", "probit", "cauchit", "cloglog"}),
    "poisson": frozenset({"log", "sqrt"}),
    "gamma": frozenset({"log"}),
    "inverse_gaussian": frozenset({"log"}),
    "negative_binomial": frozenset({"log"}),
}


@dataclass(frozen=True)
class Family:
    """An exponential-dispersion family with a known dispersion parameter.

    ``dispersion`` is sigma^2 for normal, the shape k for gamma, lambda for
    inverse Gaussian, and the size k for negative binomial. It is unused for
    bernoulli and poisson.
    """

    kind: str
    dispersion: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise UnsupportedFamilyError(f"unknown family {self.kind!r}")
        if not (self.dispersion > 0):
            raise ValueError("dispersion must be > 0")


@dataclass(frozen=True)
class Link:
    """One of the seven supported link functions."""

    kind: str

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise UnsupportedFamilyError(f"unknown link {self.kind!r}")


def as_family(family) -> Family:
    return family if isinstance(family, Family) else Family(str(family))


def as_link(link) -> Link:
    return link if isinstance(link, Link) else Link(str(link))


def inverse_link(link, u):
    """Inverse link m(u) mapping the linear predictor to the mean.

    Bounded links (logit, probit, cauchit, cloglog) are clamped to the open
    interval (0, 1) so the bernoulli variance stays positive.
    """
    kind = as_link(link).kind
    u = np.asarray(u, dtype=float)
    if kind == "identity":
        m = u.copy()
    elif kind == "log":
        m = np.exp(u)
    elif kind == "logit":
        # evaluate each tail through exp of a negative argument
        m = np.where(u >= 0, 1.0 / (1.0 + np.exp(-np.abs(u))),
                     np.exp(-np.abs(u)) / (1.0 + np.exp(-np.abs(u))))
        m = np.clip(m, _P_LO, _P_HI)
    elif kind == "probit":
        m = 0.5 * special.erfc(-u / np.sqrt(2.0))
        m = np.clip(m, _P_LO, _P_HI)
    elif kind == "cauchit":
        m = np.arctan(u) / np.pi + 0.5
        m = np.clip(m, _P_LO, _P_HI)
    elif kind == "cloglog":
        m = -np.expm1(-np.exp(u))
        m = np.clip(m, _P_LO, _P_HI)
    elif kind == "sqrt":
        m = u * u
    return m if m.ndim else float(m)


def inverse_link_deriv(link, u):
    """Derivative dm/du of the inverse link."""
    kind = as_link(link).kind
    u = np.asarray(u, dtype=float)
    if kind == "identity":
        d = np.ones_like(u)
    elif kind == "log":
        d = np.exp(u)
    elif kind == "logit":
        p = np.asarray(inverse_link("logit", u))
        d = p * (1.0 - p)
    elif kind == "probit":
        d = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    elif kind == "cauchit":
        d = 1.0 / (np.pi * (1.0 + u * u))
    elif kind == "cloglog":
        d = np.exp(u - np.exp(u))
    elif kind == "sqrt":
        d = 2.0 * u
    return d if d.ndim else float(d)


def link_transform(link, mu):
    """Forward link g(mu) = u; used to initialize fitting from mean values."""
    kind = as_link(link).kind
    mu = np.asarray(mu, dtype=float)
    if kind == "identity":
        u = mu.copy()
    elif kind == "log":
        u = np.log(mu)
    elif kind == "logit":
        p = np.clip(mu, _P_LO, _P_HI)
        u = np.log(p / (1.0 - p))
    elif kind == "probit":
        u = special.ndtri(np.clip(mu, _P_LO, _P_HI))
    elif kind == "cauchit":
        u = np.tan(np.pi * (np.clip(mu, _P_LO, _P_HI) - 0.5))
    elif kind == "cloglog":
        u = np.log(-np.log1p(-np.clip(mu, _P_LO, _P_HI)))
    elif kind == "sqrt":
        u = np.sqrt(mu)
    return u if u.ndim else float(u)


def variance_function(family, mean):
    """Conditional variance v(m) scaled by the known dispersion.

    Raises FamilyDomainError when the mean is outside the family's domain.
    """
    fam = as_family(family)
    m = np.asarray(mean, dtype=float)
    if fam.kind == "normal":
        v = np.full_like(m, fam.dispersion)
    elif fam.kind == "bernoulli":
        if np.any(m <= 0.0) or np.any(m >= 1.0):
            raise FamilyDomainError("bernoulli mean must lie in (0, 1)")
        v = m * (1.0 - m)
    elif fam.kind == "poisson":
        if np.any(m <= 0.0):
            raise FamilyDomainError("poisson mean must be positive")
        v = m.copy()
    elif fam.kind == "gamma":
        if np.any(m <= 0.0):
            raise FamilyDomainError("gamma mean must be positive")
        v = m * m / fam.dispersion
    elif fam.kind == "inverse_gaussian":
        if np.any(m <= 0.0):
            raise FamilyDomainError("inverse Gaussian mean must be positive")
        v = m ** 3 / fam.dispersion
    elif fam.kind == "negative_binomial":
        if np.any(m <= 0.0):
            raise FamilyDomainError("negative binomial mean must be positive")
        v = m + m * m / fam.dispersion
    return v if v.ndim else float(v)


def validate_pair(family, link) -> bool:
    """True exactly for the supported family/link combinations."""
    fam = as_family(family)
    lnk = as_link(link)
    return lnk.kind in VALID_PAIRS[fam.kind]


def sample_response(family, mu, rng):
    """Draw one response per mean value from the family at those means."""
    fam = as_family(family)
    mu = np.asarray(mu, dtype=float)
    if fam.kind == "normal":
        return rng.normal(mu, np.sqrt(fam.dispersion))
    if fam.kind == "bernoulli":
        return (rng.random(mu.shape) < mu).astype(float)
    if fam.kind == "poisson":
        return rng.poisson(mu).astype(float)
    if fam.kind == "gamma":
        k = fam.dispersion
        return rng.gamma(shape=k, scale=mu / k)
    if fam.kind == "inverse_gaussian":
        return rng.wald(mean=mu, scale=fam.dispersion)
    if fam.kind == "negative_binomial":
        k = fam.dispersion
        return rng.negative_binomial(n=k, p=k / (k + mu)).astype(float)
    raise UnsupportedFamilyError(fam.kind)
