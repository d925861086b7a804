"""Confidence widths for the logistic MLE and a Monte-Carlo coverage harness."""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._linalg import outside_range, psd_eig, quad_forms_projected
from .core import LogisticDataset, fisher_info, fit_mle
from .errors import BurnInWarning, InvalidConfig, InvalidInstance, NullSpaceWarning, TooFewSamples

TRUE_VARIANCE_CONST = 3.5
EMPIRICAL_VARIANCE_CONST = 5.2
VARIANCE_SANDWICH = 2.2


class BoundFamily(enum.Enum):
    THM1_TRUE = "Thm1True"
    THM1_EMPIRICAL = "Thm1Empirical"
    LI17 = "Li17"
    FAURY_ANYTIME = "FauryAnytime"


@dataclass(frozen=True)
class ConfidenceParams:
    delta: float
    t_eff: int
    d: int

    def __post_init__(self):
        if not 0 < self.delta <= math.exp(-1) + 1e-15:
            raise InvalidConfig(f"delta must lie in (0, 1/e], got {self.delta}")
        if self.t_eff < 1 or self.d < 1:
            raise InvalidConfig("t_eff and d must be positive")


@dataclass(frozen=True)
class WidthReport:
    center: float
    half_width: float
    bound_family: BoundFamily
    burnin_satisfied: bool | None = None
    null_space: bool = False


def gamma_d(params):
    """d + ln(6 (2 + t_eff) / delta)."""
    return params.d + math.log(6.0 * (2 + params.t_eff) / params.delta)


def log_term(t_eff, delta):
    return math.log(2.0 * (2 + t_eff) / delta)


def xi_sq(arms, H):
    """max over arms of ``x^T H^+ x``."""
    return float(np.max(quad_forms_projected(H, arms)))


def _norm_and_nullspace(x, H):
    x = np.asarray(x, dtype=float)
    w, U = psd_eig(H)
    coef = U.T @ x
    inside = float(np.sqrt(np.sum(coef**2 / w)))
    return inside, bool(outside_range(x[None, :], U)[0])


def width_thm1(x, H, params, empirical=False, design_arms=None, center=0.0):
    """Half-width ``c * ||x||_{H^+} * sqrt(ln(2 (2 + t_eff) / delta))``.

    ``c`` is 3.5 when ``H`` is the Fisher matrix at the true parameter and 5.2
    when it is evaluated at the estimate. If ``design_arms`` is given, the
    burn-in condition ``xi^2 <= 1/gamma(d)`` is checked against the same ``H``.
    """
    const = EMPIRICAL_VARIANCE_CONST if empirical else TRUE_VARIANCE_CONST
    nrm, outside = _norm_and_nullspace(x, H)
    if outside:
        warnings.warn("query direction has a null-space component", NullSpaceWarning)
    half = const * nrm * math.sqrt(log_term(params.t_eff, params.delta))
    burn = None
    if design_arms is not None:
        burn = xi_sq(design_arms, H) <= 1.0 / gamma_d(params)
    return WidthReport(
        center=float(center),
        half_width=float(half),
        bound_family=BoundFamily.THM1_EMPIRICAL if empirical else BoundFamily.THM1_TRUE,
        burnin_satisfied=burn,
        null_space=outside,
    )


def burnin_check(design_arms, H, params):
    return xi_sq(design_arms, H) <= 1.0 / gamma_d(params)


def width_li17(x, V, kappa, delta, center=0.0):
    """``(1/kappa) ||x||_{V^+} sqrt(ln(1/delta))``; constant set to 1."""
    if kappa <= 0:
        raise InvalidConfig("kappa must be positive")
    nrm, _ = _norm_and_nullspace(x, V)
    half = nrm * math.sqrt(math.log(1.0 / delta)) / kappa
    return WidthReport(float(center), float(half), BoundFamily.LI17)


def faury_gamma(d, t, s_star, delta):
    """3 sqrt(2S+1) [sqrt(d) log(T (2S+1) / (2d)) + sqrt(log(1/delta))], valid for T >= 4d."""
    if t < 4 * d:
        raise TooFewSamples(f"need t >= 4d = {4 * d}, got {t}")
    return 3.0 * math.sqrt(2 * s_star + 1) * (
        math.sqrt(d) * math.log(t * (2 * s_star + 1) / (2 * d)) + math.sqrt(math.log(1.0 / delta))
    )


def faury_eta(d, s_star, delta):
    return (d + math.log(1.0 / delta)) / (s_star + 0.5)


def width_faury(x, H, s_star, t, delta, eta=None, center=0.0):
    """``(2 + 4 S) Gamma_T(delta) ||x||_{(H + eta I)^{-1}}``.

    ``H`` is the unregularized Fisher sum; ``eta`` defaults to
    ``(d + log(1/delta)) / (S + 1/2)``.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    gam = faury_gamma(d, t, s_star, delta)
    if eta is None:
        eta = faury_eta(d, s_star, delta)
    H_reg = np.asarray(H, dtype=float) + eta * np.eye(d)
    nrm = math.sqrt(float(x @ np.linalg.solve(H_reg, x)))
    return WidthReport(float(center), float((2 + 4 * s_star) * gam * nrm), BoundFamily.FAURY_ANYTIME)


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageInstance:
    """A fixed allocation ``counts[i]`` of samples on ``arms[i]``."""

    arms: np.ndarray
    counts: np.ndarray
    theta_star: np.ndarray
    direction: np.ndarray
    instance_id: str = "coverage"


@dataclass(frozen=True)
class CoverageResult:
    instance_id: str
    t: int
    delta: float
    reps: int
    seed: int
    failure_rate_true: float
    failure_rate_empirical: float
    var_event_rate: float
    burnin_satisfied: bool

    CSV_COLUMNS = (
        "instance_id", "t", "delta", "reps", "seed",
        "failure_rate_true", "failure_rate_empirical", "var_event_rate",
    )

    def csv_row(self):
        return {c: getattr(self, c) for c in self.CSV_COLUMNS}


def variance_sandwich_holds(H_hat, H_star, factor=VARIANCE_SANDWICH):
    """True iff ``||x||_{H_hat^+}^2`` lies within [1/factor, factor] times
    ``||x||_{H_star^+}^2`` for every ``x`` in the range of ``H_star``."""
    w, U = psd_eig(H_star)
    S = U / np.sqrt(w)
    # generalized eigenvalues of (H_hat, H_star) on range(H_star)
    ev = np.linalg.eigvalsh(S.T @ H_hat @ S)
    return bool(ev.min() >= 1.0 / factor - 1e-12 and ev.max() <= factor + 1e-12)


def _replicate(instance, delta, seed, rep):
    rng = np.random.default_rng([seed, rep])
    counts = np.asarray(instance.counts, dtype=np.int64)
    p = 1.0 / (1.0 + np.exp(-(instance.arms @ instance.theta_star)))
    succ = rng.binomial(counts, p)
    data = LogisticDataset(instance.arms, counts, succ)
    fit = fit_mle(data)
    H_star = fisher_info(data, instance.theta_star)
    H_hat = fisher_info(data, fit.theta)
    params = ConfidenceParams(delta, data.t_eff, data.dim)
    x = instance.direction
    err = abs(float(x @ (fit.theta - instance.theta_star)))
    ok_true = err <= width_thm1(x, H_star, params).half_width
    ok_emp = err <= width_thm1(x, H_hat, params, empirical=True).half_width
    ok_var = variance_sandwich_holds(H_hat, H_star)
    return ok_true, ok_emp, ok_var


def coverage_monte_carlo(instance, delta, reps, seed, jobs=1):
    """Re-simulate a fixed design ``reps`` times and report how often the
    true-variance event, the empirical-variance event and the variance
    sandwich event fail/hold for ``instance.direction``.

    Replicate ``r`` draws from a generator keyed by ``(seed, r)``, so the
    output does not depend on ``jobs``.
    """
    if reps <= 0:
        raise InvalidConfig("reps must be positive")
    counts = np.asarray(instance.counts, dtype=np.int64)
    arms = np.atleast_2d(np.asarray(instance.arms, dtype=float))
    if arms.shape[0] != counts.shape[0]:
        raise InvalidInstance("one count per arm required")
    t = int(counts.sum())
    data0 = LogisticDataset(arms, counts, np.zeros_like(counts))
    H_star = fisher_info(data0, instance.theta_star)
    params = ConfidenceParams(delta, data0.t_eff, data0.dim)
    burn = burnin_check(arms[counts > 0], H_star, params)
    if not burn:
        warnings.warn("design violates the burn-in condition at theta*", BurnInWarning)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(lambda r: _replicate(instance, delta, seed, r), range(reps)))
    else:
        out = [_replicate(instance, delta, seed, r) for r in range(reps)]
    arr = np.array(out, dtype=bool)
    return CoverageResult(
        instance_id=instance.instance_id,
        t=t,
        delta=float(delta),
        reps=int(reps),
        seed=int(seed),
        failure_rate_true=float(1.0 - arr[:, 0].mean()),
        failure_rate_empirical=float(1.0 - arr[:, 1].mean()),
        var_event_rate=float(arr[:, 2].mean()),
        burnin_satisfied=bool(burn),
    )
