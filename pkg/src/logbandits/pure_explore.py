"""Transductive pure exploration for logistic rewards.

RAGE-GLM (phased elimination with Fisher-weighted designs), its
cumulative-data heuristic RAGE-GLM-R, a static-design Passive baseline,
RAGE-GLM-2 (projected estimator, designs frozen at the burn-in estimate),
and the theoretical sample-complexity evaluator.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import quad_forms, quad_forms_projected
from .confidence import ConfidenceParams, TRUE_VARIANCE_CONST, faury_eta, width_thm1
from .core import (
    LogisticDataset,
    check_arm_norms,
    fisher_info,
    fit_mle,
    fit_projected_mle,
    kappa_min,
)
from .design import (
    Design,
    DesignObjective,
    ObjectiveKind,
    allocation_fisher,
    apportion,
    minimize_design,
    pair_differences,
    r_eps,
    round_design,
)
from .errors import InvalidConfig, InvalidInstance, NullSpaceWarning

GAP_TOL = 1e-12
DEFAULT_BUDGET = 10**9


class Termination(enum.Enum):
    CONVERGED = "Converged"
    BUDGET_EXCEEDED = "BudgetExceeded"
    SEPARATION_FAILURE = "SeparationFailure"


class EliminationRule(enum.Enum):
    APPENDIX = "Appendix"
    MAIN_TEXT = "MainText"


# ---------------------------------------------------------------------------
# instances and logs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransductiveInstance:
    """Measurement arms ``X``, decision arms ``Z`` and the hidden ``theta*``."""

    measurement_arms: np.ndarray
    decision_arms: np.ndarray
    theta_star: np.ndarray
    instance_id: str = "instance"
    allow_large_arms: bool = False

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.measurement_arms, dtype=float))
        Z = np.atleast_2d(np.asarray(self.decision_arms, dtype=float))
        th = np.asarray(self.theta_star, dtype=float).reshape(-1)
        if Z.shape[0] == 0 or X.shape[0] == 0:
            raise InvalidInstance("X and Z must be non-empty")
        if X.shape[1] != th.size or Z.shape[1] != th.size:
            raise InvalidInstance("X, Z and theta* must share the dimension")
        check_arm_norms(X, self.allow_large_arms)
        check_arm_norms(Z, self.allow_large_arms)
        rewards = Z @ th
        order = np.sort(rewards)
        if Z.shape[0] > 1 and order[-1] - order[-2] <= GAP_TOL:
            raise InvalidInstance("best decision arm is not unique")
        diffs = pair_differences(Z)
        if diffs.shape[0] and np.any(~np.isfinite(quad_forms(X.T @ X, diffs))):
            warnings.warn("X does not span every z - z' direction; pseudo-inverse semantics apply",
                          NullSpaceWarning)
        object.__setattr__(self, "measurement_arms", X)
        object.__setattr__(self, "decision_arms", Z)
        object.__setattr__(self, "theta_star", th)

    @property
    def dim(self):
        return self.theta_star.size

    @property
    def best_arm(self):
        return int(np.argmax(self.decision_arms @ self.theta_star))

    @property
    def gaps(self):
        r = self.decision_arms @ self.theta_star
        return r.max() - r

    @property
    def delta_min(self):
        g = self.gaps
        g = g[g > 0]
        return float(g.min()) if g.size else math.inf

    @property
    def kappa0(self):
        return kappa_min(self.measurement_arms, self.theta_star)


@dataclass(frozen=True)
class RoundLog:
    k: int
    active_set_size: int
    n_k: int
    design: Design
    theta_hat: np.ndarray
    eliminated: tuple
    separation: bool = False
    event_holds: bool | None = None

    def to_dict(self):
        return {
            "k": self.k,
            "active_set_size": self.active_set_size,
            "n_k": self.n_k,
            "design_weights": self.design.weights.tolist(),
            "theta_hat": np.asarray(self.theta_hat).tolist(),
            "eliminated": list(self.eliminated),
            "separation": self.separation,
            "event_holds": self.event_holds,
        }


@dataclass(frozen=True)
class RunResult:
    algorithm: str
    instance_id: str
    seed: int
    recommended: int
    total_samples: int
    burn_in_samples: int
    rounds: tuple
    correct: bool
    terminated: Termination
    theta_burn_in: np.ndarray | None = None

    CSV_COLUMNS = ("algorithm", "instance_id", "seed", "correct", "total_samples", "rounds")

    def csv_row(self):
        return {
            "algorithm": self.algorithm,
            "instance_id": self.instance_id,
            "seed": self.seed,
            "correct": self.correct,
            "total_samples": self.total_samples,
            "rounds": len(self.rounds),
        }

    def to_csv_line(self):
        buf = io.StringIO()
        csv.DictWriter(buf, self.CSV_COLUMNS, lineterminator="\n").writerow(self.csv_row())
        return buf.getvalue()

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "instance_id": self.instance_id,
            "seed": self.seed,
            "recommended": self.recommended,
            "correct": self.correct,
            "total_samples": self.total_samples,
            "burn_in_samples": self.burn_in_samples,
            "terminated": self.terminated.value,
            "theta_burn_in": None if self.theta_burn_in is None else self.theta_burn_in.tolist(),
            "rounds": [r.to_dict() for r in self.rounds],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class RageOptions:
    elimination_rule: EliminationRule = EliminationRule.APPENDIX
    budget: int = DEFAULT_BUDGET
    r_variant: str = "appendix"
    design_tol: float = 1e-4
    design_max_iters: int = 5000
    max_rounds: int = 60

    def __post_init__(self):
        object.__setattr__(self, "elimination_rule", EliminationRule(self.elimination_rule))
        if self.budget <= 0 or self.max_rounds <= 0:
            raise InvalidConfig("budget and max_rounds must be positive")


def _check_params(delta, epsilon):
    if not 0 < delta < 1:
        raise InvalidConfig("delta must lie in (0, 1)")
    if not 0 < epsilon:
        raise InvalidConfig("epsilon must be positive")


def _gamma(d, n_arms, delta):
    """gamma(d) with t_eff bounded by the number of measurement arms."""
    return d + math.log(6.0 * (2 + n_arms) / delta)


# ---------------------------------------------------------------------------
# burn-in
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BurnInResult:
    theta0: np.ndarray
    samples_used: int
    design: Design
    data: LogisticDataset
    separation: bool


def burn_in_size(d, n_arms, delta, epsilon, kappa0, r_variant="appendix"):
    """``ceil(3 (1+eps) kappa0^{-1} d gamma(d) log(2|X|(2+|X|)/delta))``, floored at r(eps)."""
    if not kappa0 > 0:
        raise InvalidConfig("kappa0 must be positive")
    g = _gamma(d, n_arms, delta)
    n0 = math.ceil(3 * (1 + epsilon) / kappa0 * d * g * math.log(2 * n_arms * (2 + n_arms) / delta))
    return max(n0, math.ceil(r_eps(d, epsilon, r_variant)))


def burn_in(instance, delta, epsilon, kappa0, env, opts=RageOptions()):
    """Sample a rounded G-optimal design of size n0 and fit the MLE.

    ``kappa0`` is the caller's lower bound on the smallest link derivative
    over ``X`` (so ``1/kappa0`` upper-bounds kappa0^{-1}).
    """
    _check_params(delta, epsilon)
    X = instance.measurement_arms
    n0 = burn_in_size(instance.dim, X.shape[0], delta, epsilon, kappa0, opts.r_variant)
    design = minimize_design(DesignObjective(ObjectiveKind.G_OPTIMAL, X),
                             tol=opts.design_tol, max_iters=opts.design_max_iters)
    alloc = round_design(design, n0, epsilon, opts.r_variant)
    data = env.sample(X, alloc.counts, tag="burn-in")
    fit = fit_mle(data)
    return BurnInResult(fit.theta, n0, design, data, fit.separation_detected)


# ---------------------------------------------------------------------------
# helpers shared by the elimination algorithms
# ---------------------------------------------------------------------------

def _appendix_threshold(n_z, n_x, k, delta):
    return TRUE_VARIANCE_CONST * math.sqrt(3 * math.log(2 * n_z * (2 + n_x) * k * k / delta))


def _pair_widths(H, Z, active, threshold):
    """``threshold * ||z' - z||_{H^+}`` for all ordered pairs of active arms."""
    A = Z[active]
    D = A[None, :, :] - A[:, None, :]  # D[i, j] = z_j - z_i
    q = quad_forms_projected(H, D.reshape(-1, Z.shape[1])).reshape(len(active), len(active))
    return threshold * np.sqrt(q)


def _eliminate(rule, Z, active, theta_hat, k, H=None, threshold=None):
    """Return the surviving indices of ``active``."""
    scores = Z[active] @ theta_hat
    if rule is EliminationRule.MAIN_TEXT:
        keep = scores.max() - scores < 2.0**-k
    else:
        W = _pair_widths(H, Z, active, threshold)
        adv = scores[None, :] - scores[:, None]  # adv[i, j] = <z_j - z_i, theta>
        np.fill_diagonal(adv, -np.inf)
        keep = ~np.any(adv >= W, axis=1)
    if not keep.any():
        keep[np.argmax(scores)] = True
    return [a for a, kp in zip(active, keep) if kp]


def _event_holds(instance, active, theta_hat, H, threshold):
    """Oracle check that every active z* - z comparison is inside its width."""
    Z = instance.decision_arms
    zs = instance.best_arm
    if zs not in active:
        return False
    D = Z[zs] - Z[active]
    err = np.abs(D @ (theta_hat - instance.theta_star))
    w = threshold * np.sqrt(quad_forms_projected(H, D))
    return bool(np.all(err <= w + 1e-12))


def _recommend(instance, active, theta):
    Z = instance.decision_arms
    return int(active[int(np.argmax(Z[active] @ theta))])


def _finish(name, instance, env, active, theta, total, n0, rounds, status, theta0):
    rec = active[0] if len(active) == 1 else _recommend(instance, active, theta)
    return RunResult(
        algorithm=name,
        instance_id=instance.instance_id,
        seed=env.seed,
        recommended=int(rec),
        total_samples=int(total),
        burn_in_samples=int(n0),
        rounds=tuple(rounds),
        correct=bool(rec == instance.best_arm),
        terminated=status,
        theta_burn_in=theta0,
    )


# ---------------------------------------------------------------------------
# RAGE-GLM
# ---------------------------------------------------------------------------

def rage_glm(instance, delta, epsilon, kappa0, env, opts=RageOptions()):
    """Phased elimination with per-round fixed designs.

    Round ``k`` minimizes
    ``max[gamma(d) max_x ||x||^2_{H(lam, th_{k-1})^+}, 4^k 3.5^2 max_{z,z'} ||z - z'||^2_{H(lam, th_{k-1})^+}]``,
    draws ``max(3(1+eps) f log(1/delta_k), r(eps))`` samples, refits the MLE
    on that round's samples only and eliminates by the configured rule.
    """
    _check_params(delta, epsilon)
    X, Z = instance.measurement_arms, instance.decision_arms
    nx, nz, d = X.shape[0], Z.shape[0], instance.dim
    active = list(range(nz))
    if nz == 1:
        return _finish("RAGE-GLM", instance, env, active, instance.theta_star * 0, 0, 0, [],
                       Termination.CONVERGED, None)

    bi = burn_in(instance, delta, epsilon, kappa0, env, opts)
    total, theta_prev = bi.samples_used, bi.theta0
    if bi.separation:
        return _finish("RAGE-GLM", instance, env, active, theta_prev, total, bi.samples_used, [],
                       Termination.SEPARATION_FAILURE, bi.theta0)
    gamma = _gamma(d, nx, delta)
    r_min = math.ceil(r_eps(d, epsilon, opts.r_variant))
    rounds, status, design = [], Termination.CONVERGED, None
    k = 0
    while len(active) > 1:
        k += 1
        if k > opts.max_rounds:
            status = Termination.BUDGET_EXCEEDED
            break
        delta_k = delta / (2 * k * k * max(nz, nx) * (2 + nx))
        objs = [
            DesignObjective(ObjectiveKind.MAX_DIRECTION_H, X, theta=theta_prev, scale=gamma),
            DesignObjective(ObjectiveKind.MAX_PAIR_H, X, theta=theta_prev, directions=Z[active],
                            scale=4.0**k * TRUE_VARIANCE_CONST**2),
        ]
        design = minimize_design(objs, tol=opts.design_tol, max_iters=opts.design_max_iters,
                                 init=None if design is None else design.weights)
        f = design.value * math.log(1.0 / delta_k)
        n_k = max(math.ceil(3 * (1 + epsilon) * f), r_min)
        if total + n_k > opts.budget:
            status = Termination.BUDGET_EXCEEDED
            break
        alloc = round_design(design, n_k, epsilon, opts.r_variant)
        data = env.sample(X, alloc.counts, tag=f"round-{k}")
        total += n_k
        fit = fit_mle(data)
        H = allocation_fisher(alloc, theta_prev)
        thr = _appendix_threshold(nz, nx, k, delta)
        event = _event_holds(instance, active, fit.theta, H, thr)
        if fit.separation_detected:
            # keep the previous estimate for the next design; no elimination
            rounds.append(RoundLog(k, len(active), n_k, design, fit.theta, (), True, event))
            continue
        survivors = _eliminate(opts.elimination_rule, Z, active, fit.theta, k, H, thr)
        gone = tuple(a for a in active if a not in survivors)
        rounds.append(RoundLog(k, len(active), n_k, design, fit.theta, gone, False, event))
        active, theta_prev = survivors, fit.theta
    return _finish("RAGE-GLM", instance, env, active, theta_prev, total, bi.samples_used,
                   rounds, status, bi.theta0)


def rage_glm_r(instance, delta, epsilon, kappa0, env, opts=RageOptions()):
    """RAGE-GLM heuristic: pair-only designs and a cumulative MLE.

    One initial burn-in provides the first estimate and its samples stay in
    the cumulative dataset. Elimination uses the cumulative Fisher matrix at
    the previous estimate.
    """
    _check_params(delta, epsilon)
    X, Z = instance.measurement_arms, instance.decision_arms
    nx, nz, d = X.shape[0], Z.shape[0], instance.dim
    active = list(range(nz))
    if nz == 1:
        return _finish("RAGE-GLM-R", instance, env, active, instance.theta_star * 0, 0, 0, [],
                       Termination.CONVERGED, None)
    bi = burn_in(instance, delta, epsilon, kappa0, env, opts)
    total, theta_prev, data = bi.samples_used, bi.theta0, bi.data
    if bi.separation:
        return _finish("RAGE-GLM-R", instance, env, active, theta_prev, total, bi.samples_used, [],
                       Termination.SEPARATION_FAILURE, bi.theta0)
    r_min = math.ceil(r_eps(d, epsilon, opts.r_variant))
    rounds, status, design = [], Termination.CONVERGED, None
    k = 0
    while len(active) > 1:
        k += 1
        if k > opts.max_rounds:
            status = Termination.BUDGET_EXCEEDED
            break
        delta_k = delta / (2 * k * k * max(nz, nx) * (2 + nx))
        obj = DesignObjective(ObjectiveKind.MAX_PAIR_H, X, theta=theta_prev, directions=Z[active],
                              scale=4.0**k * TRUE_VARIANCE_CONST**2)
        design = minimize_design(obj, tol=opts.design_tol, max_iters=opts.design_max_iters,
                                 init=None if design is None else design.weights)
        n_k = max(math.ceil(3 * (1 + epsilon) * design.value * math.log(1.0 / delta_k)), r_min)
        if total + n_k > opts.budget:
            status = Termination.BUDGET_EXCEEDED
            break
        alloc = round_design(design, n_k, epsilon, opts.r_variant)
        data = data.concat(env.sample(X, alloc.counts, tag=f"round-{k}"))
        total += n_k
        fit = fit_mle(data)
        H = fisher_info(data, theta_prev)
        thr = _appendix_threshold(nz, nx, k, delta)
        event = _event_holds(instance, active, fit.theta, H, thr)
        if fit.separation_detected:
            rounds.append(RoundLog(k, len(active), n_k, design, fit.theta, (), True, event))
            continue
        survivors = _eliminate(opts.elimination_rule, Z, active, fit.theta, k, H, thr)
        gone = tuple(a for a in active if a not in survivors)
        rounds.append(RoundLog(k, len(active), n_k, design, fit.theta, gone, False, event))
        active, theta_prev = survivors, fit.theta
    return _finish("RAGE-GLM-R", instance, env, active, theta_prev, total, bi.samples_used,
                   rounds, status, bi.theta0)


# ---------------------------------------------------------------------------
# Passive
# ---------------------------------------------------------------------------

def passive_baseline(instance, delta, epsilon, kappa0, env, opts=RageOptions()):
    """Burn-in, then a static pair design at the burn-in estimate.

    Round ``k`` appends ``2^k`` fresh samples (apportioned to the static
    design) to the cumulative dataset, refits the MLE and stops once every
    ``z != z_hat`` is certified suboptimal by the empirical-variance width at
    level ``delta / (2 k^2 |Z|)``.
    """
    _check_params(delta, epsilon)
    X, Z = instance.measurement_arms, instance.decision_arms
    nz, d = Z.shape[0], instance.dim
    all_arms = list(range(nz))
    if nz == 1:
        return _finish("Passive", instance, env, all_arms, instance.theta_star * 0, 0, 0, [],
                       Termination.CONVERGED, None)
    bi = burn_in(instance, delta, epsilon, kappa0, env, opts)
    total, data, theta = bi.samples_used, bi.data, bi.theta0
    if bi.separation:
        return _finish("Passive", instance, env, all_arms, theta, total, bi.samples_used, [],
                       Termination.SEPARATION_FAILURE, bi.theta0)
    design = minimize_design(
        DesignObjective(ObjectiveKind.MAX_PAIR_H, X, theta=bi.theta0, directions=Z),
        tol=opts.design_tol, max_iters=opts.design_max_iters)
    rounds, status = [], Termination.BUDGET_EXCEEDED
    recommended = None
    for k in range(1, opts.max_rounds + 1):
        n_k = 2**k
        if total + n_k > opts.budget:
            break
        counts = apportion(design.weights, n_k)
        data = data.concat(env.sample(X, counts, tag=f"round-{k}"))
        total += n_k
        fit = fit_mle(data)
        theta = fit.theta
        zhat = int(np.argmax(Z @ theta))
        H = fisher_info(data, theta)
        params = ConfidenceParams(min(delta / (2 * k * k * nz), math.exp(-1)), data.t_eff, d)
        certified = True
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NullSpaceWarning)
            for z in range(nz):
                if z == zhat:
                    continue
                v = Z[zhat] - Z[z]
                w = width_thm1(v, H, params, empirical=True)
                if w.null_space or not float(v @ theta) > w.half_width:
                    certified = False
                    break
        rounds.append(RoundLog(k, nz, n_k, design, theta, (), fit.separation_detected, None))
        if certified and not fit.separation_detected:
            status, recommended = Termination.CONVERGED, zhat
            break
    active = [recommended] if recommended is not None else all_arms
    return _finish("Passive", instance, env, active, theta, total, bi.samples_used, rounds,
                   status, bi.theta0)


# ---------------------------------------------------------------------------
# RAGE-GLM-2
# ---------------------------------------------------------------------------

def rage2_constant(epsilon, s_star):
    """c(S*, eps) = 48 sqrt((1 + eps)(2 S* + 1)^3)."""
    return 48.0 * math.sqrt((1 + epsilon) * (2 * s_star + 1) ** 3)


def rage2_round_size(t, d, f, s_star, delta, n_z, epsilon):
    """``r_t = ceil(4^t c^2 f (sqrt(d) log(c^2 4^t (2S*+1) f / d) + sqrt(log(t^2 |Z|^2 / delta)))^2)``."""
    c2 = rage2_constant(epsilon, s_star) ** 2
    inner = math.sqrt(d) * math.log(c2 * 4.0**t * (2 * s_star + 1) * f / d) + math.sqrt(
        math.log(t * t * n_z * n_z / delta))
    return math.ceil(4.0**t * c2 * f * inner**2)


def rage_glm_2(instance, delta, epsilon, kappa0, s_star, env, opts=RageOptions()):
    """Elimination with designs frozen at the burn-in estimate and the
    norm-constrained projected estimator on each round's samples."""
    _check_params(delta, epsilon)
    if not s_star > 0:
        raise InvalidConfig("s_star must be positive")
    X, Z = instance.measurement_arms, instance.decision_arms
    nz, d = Z.shape[0], instance.dim
    active = list(range(nz))
    if nz == 1:
        return _finish("RAGE-GLM-2", instance, env, active, instance.theta_star * 0, 0, 0, [],
                       Termination.CONVERGED, None)
    bi = burn_in(instance, delta, epsilon, kappa0, env, opts)
    total, theta0 = bi.samples_used, bi.theta0
    eta = faury_eta(d, s_star, delta)
    r_min = math.ceil(r_eps(d, epsilon, opts.r_variant))
    rounds, status, design, theta = [], Termination.CONVERGED, None, theta0
    t = 0
    while len(active) > 1:
        t += 1
        if t > opts.max_rounds:
            status = Termination.BUDGET_EXCEEDED
            break
        obj = DesignObjective(ObjectiveKind.MAX_PAIR_H, X, theta=theta0, directions=Z[active])
        design = minimize_design(obj, tol=opts.design_tol, max_iters=opts.design_max_iters,
                                 init=None if design is None else design.weights)
        n_t = max(rage2_round_size(t, d, design.value, s_star, delta, nz, epsilon), r_min)
        if total + n_t > opts.budget:
            status = Termination.BUDGET_EXCEEDED
            break
        alloc = round_design(design, n_t, epsilon, opts.r_variant)
        data = env.sample(X, alloc.counts, tag=f"round-{t}")
        total += n_t
        fit = fit_projected_mle(data, eta, s_star)
        theta = fit.theta
        survivors = _eliminate(EliminationRule.MAIN_TEXT, Z, active, theta, t)
        gone = tuple(a for a in active if a not in survivors)
        rounds.append(RoundLog(t, len(active), n_t, design, theta, gone, False, None))
        active = survivors
    return _finish("RAGE-GLM-2", instance, env, active, theta, total, bi.samples_used, rounds,
                   status, theta0)


# ---------------------------------------------------------------------------
# sample-complexity evaluator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexityReport:
    beta_k: tuple
    pair_terms: tuple
    total: float
    rho_star: float
    n_rounds: int
    active_sizes: tuple = field(default=())


def sample_complexity_bound(instance, delta, epsilon, opts=RageOptions()):
    """Oracle evaluation of the per-round design values ``beta_k`` at theta*.

    ``S_k = {z : (z* - z)^T theta* <= 2 * 2^-k}`` for ``k = 1..ceil(log2(2/Delta_min))``.
    ``total`` adds the log factors, the rounding floor and the burn-in term;
    ``rho_star`` keeps only the ``4^k`` pair terms.
    """
    _check_params(delta, epsilon)
    X, Z, th = instance.measurement_arms, instance.decision_arms, instance.theta_star
    nx, nz, d = X.shape[0], Z.shape[0], instance.dim
    gamma = _gamma(d, nx, delta)
    if nz == 1:
        return ComplexityReport((), (), 0.0, 0.0, 0)
    K = math.ceil(math.log2(2.0 / instance.delta_min))
    gaps = instance.gaps
    g_obj = DesignObjective(ObjectiveKind.MAX_DIRECTION_H, X, theta=th, scale=gamma)
    betas, pairs, sizes = [], [], []
    total = 0.0
    for k in range(1, K + 1):
        S_k = np.flatnonzero(gaps <= 2.0 * 2.0**-k + GAP_TOL)
        sizes.append(int(S_k.size))
        if S_k.size > 1:
            p_obj = DesignObjective(ObjectiveKind.MAX_PAIR_H, X, theta=th, directions=Z[S_k])
            pair_val = minimize_design(p_obj, tol=opts.design_tol).value
            both = minimize_design(
                [g_obj, DesignObjective(ObjectiveKind.MAX_PAIR_H, X, theta=th, directions=Z[S_k],
                                        scale=4.0**k)],
                tol=opts.design_tol).value
        else:
            pair_val = 0.0
            both = minimize_design(g_obj, tol=opts.design_tol).value
        pairs.append(4.0**k * pair_val)
        betas.append(both)
        total += (1 + epsilon) * both * math.log(max(nx, nz * nz) * k * k / delta)
    kappa0 = instance.kappa0
    total += r_eps(d, epsilon, opts.r_variant) * math.log(1.0 / instance.delta_min)
    total += d * (1 + epsilon) * gamma / kappa0 * math.log(nx / delta)
    return ComplexityReport(tuple(betas), tuple(pairs), float(total), float(sum(pairs)), K,
                            tuple(sizes))
