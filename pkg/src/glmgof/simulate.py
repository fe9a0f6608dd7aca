"""Monte Carlo harness: data-generating settings, replication engine,
rejection-rate summaries with Wilson intervals, and paired McNemar
comparisons.

Null settings draw Poisson responses from log-linear (1-6) or
squared-linear (1b-3b) means; power settings generate data under a known
model flaw and fit the null model that omits it; the large-model setting
scales the parameter count at constant fitted-value spread. Every
replication gets its own counter-based random stream derived from
(master seed, replication index), so results are independent of execution
order and thread count.
"""

from __future__ import annotations

import math
import warnings as _pywarnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import GlmGofError
from .fitting import Dataset, fit_irls
from .gof import ghl_test, naive_ghl, sw_test
from .grouping import variance_weighted_endpoints

NULL_SETTINGS = {
    # id: (coefficients, fit link, covariate law)
    "null_1": ((1.15, 1.15), "log", "uniform"),
    "null_1b": ((5.16, 1.61), "sqrt", "uniform"),
    "null_2": ((1.15, 0.384), "log", "uniform"),
    "null_2b": ((2.08, 0.360), "sqrt", "uniform"),
    "null_3": ((-1.15, 0.384), "log", "uniform"),
    "null_3b": ((0.658, 0.114), "sqrt", "uniform"),
    "null_4": ((1.0, 0.2, -0.2, 0.7), "log", "normal_bernoulli"),
    "null_5": ((1.70, 0.148, 0.148), "log", "correlated_normal"),
    "null_6": ((1.15, 0.384), "log", "exponential"),
}

POWER_J_GRID = {
    "power_1": (4.0, 6.0, 8.0, 10.0),
    "power_2": (1 / 16, 1 / 8, 1 / 4, 1 / 2),
    "power_3": (8.0, 12.0, 16.0, 20.0),
}

POWER_SETTINGS = ("power_1", "power_2", "power_3", "power_4_sqrt",
                  "power_4_identity")

LARGE_MODEL_D_GRID = (2, 10, 20, 30, 40, 50)
LARGE_MODEL_INTERCEPT = 1.67
LARGE_MODEL_SLOPE_SQ = 0.0717

HARNESS_TESTS = ("ghl", "naive", "sw")


@dataclass(frozen=True)
class SettingSpec:
    """One simulation configuration."""

    id: str
    n: int = 100
    J: float | None = None
    d: int | None = None
    seed: int = 0
    coefficients: tuple = ()
    covariate_law: str = ""
    fit_family: str = "poisson"
    fit_link: str = "log"
    warm_start: bool = False


def power_coefficients(setting_id: str, J: float) -> tuple:
    """True data-generating coefficients for a power setting at deviation J."""
    if setting_id == "power_1":
        return (1.61, 0.347 - math.log(J) / 6.0, -0.0633 + math.log(J) / 18.0)
    if setting_id == "power_2":
        return (1.61, 0.157)
    if setting_id == "power_3":
        # beta2, beta3 solve the corner-mean constraints exactly:
        # exp(b0 +/- 3 b1) = 7, 5 and the (3, 1) corner must equal J
        return (1.78, 0.0561, 0.5 * math.log(J / 7.0), math.log(J / 7.0) / 6.0)
    raise ValueError(f"{setting_id} has no J-indexed coefficients")


def make_setting(setting_id: str, n: int = 100, J: float | None = None,
                 d: int | None = None, seed: int = 0) -> SettingSpec:
    """Build a SettingSpec for a named null, power, or large-model setting."""
    if setting_id in NULL_SETTINGS:
        coeffs, link, law = NULL_SETTINGS[setting_id]
        return SettingSpec(
            id=setting_id, n=n, seed=seed, coefficients=coeffs,
            covariate_law=law, fit_family="poisson", fit_link=link,
            warm_start=(link == "sqrt"),
        )
    if setting_id in ("power_1", "power_2", "power_3"):
        if J is None:
            raise ValueError(f"{setting_id} needs a deviation index J")
        if J not in POWER_J_GRID[setting_id]:
            raise ValueError(
                f"invalid J = {J} for {setting_id}; "
                f"grid is {POWER_J_GRID[setting_id]}"
            )
        return SettingSpec(
            id=setting_id, n=n, J=J, seed=seed,
            coefficients=power_coefficients(setting_id, J),
            covariate_law="uniform", fit_family="poisson", fit_link="log",
        )
    if setting_id in ("power_4_sqrt", "power_4_identity"):
        coeffs = (2.24, 0.197) if setting_id.endswith("sqrt") else (5.0, 1.0)
        return SettingSpec(
            id=setting_id, n=n, seed=seed, coefficients=coeffs,
            covariate_law="uniform", fit_family="poisson", fit_link="log",
        )
    if setting_id == "large_model":
        if d is None:
            raise ValueError("large_model needs a parameter count d")
        slope = math.sqrt(LARGE_MODEL_SLOPE_SQ / (d - 1))
        return SettingSpec(
            id=setting_id, n=n, d=d, seed=seed,
            coefficients=(LARGE_MODEL_INTERCEPT,) + (slope,) * (d - 1),
            covariate_law="standard_normal", fit_family="poisson",
            fit_link="log",
        )
    raise ValueError(f"unknown setting {setting_id!r}")


def replication_rng(seed: int, *path: int) -> np.random.Generator:
    """Counter-based stream for (seed, replication index, ...)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def _draw_correlated_pair(rng, n: int, corr: float):
    z = rng.standard_normal((n, 2))
    x1 = z[:, 0]
    x2 = corr * z[:, 0] + math.sqrt(1.0 - corr * corr) * z[:, 1]
    return x1, x2


def generate_null(setting: SettingSpec, rng) -> Dataset:
    """Covariates from the setting's law, Poisson response from the true
    mean; the returned design is the one the null model is fitted to."""
    if setting.id not in NULL_SETTINGS:
        raise ValueError(f"{setting.id} is not a null setting")
    n = setting.n
    beta = np.asarray(setting.coefficients)
    law = setting.covariate_law
    if law == "uniform":
        X = np.column_stack([np.ones(n), rng.uniform(-3.0, 3.0, n)])
    elif law == "exponential":
        X = np.column_stack([np.ones(n), rng.exponential(1.0, n)])
    elif law == "normal_bernoulli":
        b = (rng.random(n) < 0.5).astype(float)
        x1, x2 = _draw_correlated_pair(rng, n, 0.5)
        shift = 2.0 * b - 1.0
        X = np.column_stack([np.ones(n), x1 + shift, x2 + shift, b])
    elif law == "correlated_normal":
        x1, x2 = _draw_correlated_pair(rng, n, 0.7)
        X = np.column_stack([np.ones(n), x1, x2])
    else:
        raise ValueError(f"unknown covariate law {law!r}")
    eta = X @ beta
    mu = eta * eta if setting.fit_link == "sqrt" else np.exp(eta)
    y = rng.poisson(mu).astype(float)
    return Dataset(X, y)


def generate_power(setting: SettingSpec, J: float | None, rng):
    """Data under the flawed truth plus the (misspecified) fit instruction.

    Returns (Dataset, instruction) where the dataset's design is the one the
    null model is fitted to and the instruction names the family/link to fit.
    """
    sid = setting.id
    n = setting.n
    instruction = {"family": setting.fit_family, "link": setting.fit_link}
    if sid in POWER_J_GRID:
        if J is None:
            J = setting.J
        if J not in POWER_J_GRID[sid]:
            raise ValueError(f"invalid J = {J} for {sid}")
        beta = np.asarray(power_coefficients(sid, J))
    elif sid in ("power_4_sqrt", "power_4_identity"):
        beta = np.asarray(setting.coefficients)
    else:
        raise ValueError(f"{sid} is not a power setting")

    x = rng.uniform(-3.0, 3.0, n)
    if sid == "power_1":
        mu = np.exp(beta[0] + beta[1] * x + beta[2] * x * x)
        y = rng.poisson(mu).astype(float)
        design = np.column_stack([np.ones(n), x])
    elif sid == "power_2":
        mu = np.exp(beta[0] + beta[1] * x)
        k = 1.0 / J
        y = rng.negative_binomial(n=k, p=k / (k + mu)).astype(float)
        design = np.column_stack([np.ones(n), x])
    elif sid == "power_3":
        b = (rng.random(n) < 0.5).astype(float)
        mu = np.exp(beta[0] + beta[1] * x + beta[2] * b + beta[3] * x * b)
        y = rng.poisson(mu).astype(float)
        design = np.column_stack([np.ones(n), x, b])
    elif sid == "power_4_sqrt":
        mu = (beta[0] + beta[1] * x) ** 2
        y = rng.poisson(mu).astype(float)
        design = np.column_stack([np.ones(n), x])
    else:  # power_4_identity
        mu = beta[0] + beta[1] * x
        y = rng.poisson(mu).astype(float)
        design = np.column_stack([np.ones(n), x])
    return Dataset(design, y), instruction


def generate_large_model(d: int, n: int, rng) -> Dataset:
    """Standard-normal covariates in d-1 dimensions with slopes scaled so the
    linear-predictor variance stays constant as d grows."""
    if n <= d:
        raise ValueError("need n > d")
    if d not in LARGE_MODEL_D_GRID:
        _pywarnings.warn(f"d = {d} is outside the studied grid "
                         f"{LARGE_MODEL_D_GRID}", stacklevel=2)
    slope = math.sqrt(LARGE_MODEL_SLOPE_SQ / (d - 1))
    Z = rng.standard_normal((n, d - 1))
    X = np.column_stack([np.ones(n), Z])
    mu = np.exp(LARGE_MODEL_INTERCEPT + Z.sum(axis=1) * slope)
    y = rng.poisson(mu).astype(float)
    return Dataset(X, y)


def _generate(setting: SettingSpec, rng) -> Dataset:
    if setting.id in NULL_SETTINGS:
        return generate_null(setting, rng)
    if setting.id in POWER_SETTINGS:
        data, _ = generate_power(setting, setting.J, rng)
        return data
    if setting.id == "large_model":
        return generate_large_model(setting.d, setting.n, rng)
    raise ValueError(f"unknown setting {setting.id!r}")


@dataclass
class TestSummary:
    evaluated: int = 0
    rejections: int = 0
    rate: float = float("nan")
    wilson_low: float = float("nan")
    wilson_high: float = float("nan")
    stat_mean: float = float("nan")
    stat_var: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "evaluated": self.evaluated,
            "rejections": self.rejections,
            "rate": self.rate,
            "wilson_low": self.wilson_low,
            "wilson_high": self.wilson_high,
            "stat_mean": self.stat_mean,
            "stat_var": self.stat_var,
        }


@dataclass
class SimResult:
    setting: SettingSpec
    G: int
    alpha: float
    seed: int
    reps_requested: int
    reps_completed: int
    reps_discarded: int
    discard_causes: dict
    tests: dict  # name -> TestSummary
    flags: dict = field(default_factory=dict)  # name -> list of bool/None

    def to_dict(self) -> dict:
        return {
            "setting": {
                "id": self.setting.id,
                "n": self.setting.n,
                "J": self.setting.J,
                "d": self.setting.d,
            },
            "G": self.G,
            "alpha": self.alpha,
            "seed": self.seed,
            "reps_requested": self.reps_requested,
            "reps_completed": self.reps_completed,
            "reps_discarded": self.reps_discarded,
            "discard_causes": dict(sorted(self.discard_causes.items())),
            "tests": {name: s.to_dict() for name, s in sorted(self.tests.items())},
        }


def _fit_null_model(setting: SettingSpec, data: Dataset):
    if setting.warm_start:
        # noncanonical link: start from the canonical fit's means
        try:
            warm = fit_irls(data, setting.fit_family, "log")
            mu0 = warm.mu if warm.converged else None
        except GlmGofError:
            mu0 = None
        return fit_irls(data, setting.fit_family, setting.fit_link,
                        initial_mu=mu0)
    return fit_irls(data, setting.fit_family, setting.fit_link)


def _one_replication(setting, rep, seed, tests, alpha, G, sw_boot, run_sw):
    rng = replication_rng(seed, rep)
    out = {"ok": False, "cause": None, "stats": {}, "flags": {}}
    data = _generate(setting, rng)  # misconfiguration should fail loudly
    try:
        model = _fit_null_model(setting, data)
    except GlmGofError:
        out["cause"] = "fit_error"
        return out
    if not model.converged:
        out["cause"] = "fit_nonconvergence"
        return out
    try:
        spec = variance_weighted_endpoints(model, G)
    except GlmGofError:
        out["cause"] = "grouping_error"
        return out
    for name in tests:
        try:
            if name == "ghl":
                res = ghl_test(model, data, spec)
            elif name == "naive":
                res = naive_ghl(model, spec)
            elif name == "sw":
                if not run_sw:
                    out["stats"][name] = None
                    out["flags"][name] = None
                    continue
                res = sw_test(
                    model, data, n_boot=sw_boot,
                    seed=np.random.SeedSequence(entropy=seed,
                                                spawn_key=(rep, 1)),
                )
            else:
                raise ValueError(f"unknown test {name!r}")
        except GlmGofError:
            out["cause"] = f"test_error_{name}"
            return out
        out["stats"][name] = res.statistic
        out["flags"][name] = bool(res.p_value <= alpha)
    out["ok"] = True
    return out


def run_replications(setting: SettingSpec, tests, reps: int, alpha: float,
                     G: int, seed: int | None = None, *, threads: int = 1,
                     sw_boot: int = 200, sw_max_reps: int | None = None
                     ) -> SimResult:
    """Generate, fit, and test ``reps`` independent replications.

    Replications that fail to fit, group, or test are discarded and counted
    by cause. Results are deterministic for a fixed seed regardless of
    ``threads``. ``sw_max_reps`` caps the number of replication indices on
    which the bootstrap-based test is evaluated.
    """
    if reps < 1:
        raise ValueError("need reps >= 1")
    tests = tuple(tests)
    for name in tests:
        if name not in HARNESS_TESTS:
            raise ValueError(f"unknown test {name!r}; choose from {HARNESS_TESTS}")
    if G < 2:
        raise ValueError("need G >= 2")
    if "naive" in tests and G < 3:
        raise ValueError("the naive test needs G >= 3")
    seed = setting.seed if seed is None else seed

    def work(rep):
        run_sw = sw_max_reps is None or rep < sw_max_reps
        return _one_replication(setting, rep, seed, tests, alpha, G,
                                sw_boot, run_sw)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, range(reps)))
    else:
        results = [work(rep) for rep in range(reps)]

    causes: dict = {}
    completed = 0
    stats = {name: [] for name in tests}
    flags = {name: [] for name in tests}
    for out in results:
        if not out["ok"]:
            causes[out["cause"]] = causes.get(out["cause"], 0) + 1
            continue
        completed += 1
        for name in tests:
            if out["stats"][name] is None:
                flags[name].append(None)
                continue
            stats[name].append(out["stats"][name])
            flags[name].append(out["flags"][name])

    summaries = {}
    for name in tests:
        evaluated = sum(f is not None for f in flags[name])
        rejections = sum(bool(f) for f in flags[name] if f is not None)
        s = TestSummary(evaluated=evaluated, rejections=rejections)
        if evaluated:
            s.rate = rejections / evaluated
            s.wilson_low, s.wilson_high = wilson_ci(rejections, evaluated, 0.95)
            arr = np.asarray(stats[name])
            s.stat_mean = float(arr.mean())
            s.stat_var = float(arr.var(ddof=1)) if arr.size > 1 else 0.0
        summaries[name] = s

    return SimResult(
        setting=setting,
        G=G,
        alpha=alpha,
        seed=seed,
        reps_requested=reps,
        reps_completed=completed,
        reps_discarded=reps - completed,
        discard_causes=causes,
        tests=summaries,
        flags=flags,
    )


def wilson_ci(successes: int, trials: int, level: float = 0.95):
    """Wilson score interval for a binomial proportion."""
    if not (0 <= successes <= trials) or trials < 1:
        raise ValueError("need 0 <= successes <= trials, trials >= 1")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    z = float(special.ndtri(0.5 + level / 2.0))
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials
                         + z2 / (4.0 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


def mcnemar_compare(flags_a, flags_b) -> float:
    """Exact two-sided McNemar p-value on discordant reject/accept pairs."""
    a = [bool(f) for f in flags_a]
    b = [bool(f) for f in flags_b]
    if len(a) != len(b):
        raise ValueError("flag vectors must have equal length")
    n_ab = sum(1 for x, y in zip(a, b) if x and not y)
    n_ba = sum(1 for x, y in zip(a, b) if y and not x)
    m = n_ab + n_ba
    if m == 0:
        _pywarnings.warn("no discordant pairs; McNemar p-value is 1",
                         stacklevel=2)
        return 1.0
    k = min(n_ab, n_ba)
    tail = sum(math.comb(m, j) for j in range(k + 1))
    return min(1.0, 2.0 * (tail / 2 ** m))


def bonferroni(p_value: float, comparisons: int) -> float:
    """Bonferroni-adjusted p-value."""
    return min(1.0, p_value * comparisons)
