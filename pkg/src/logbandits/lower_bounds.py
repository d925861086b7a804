"""Lower-bound tooling: the moderate-confidence hard instance, logistic
Bernoulli KL, the secant-weighted matrices G and K, the alternative
parameter theta_z and a numeric transportation lower bound."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import psd_pinv, quad_forms_projected
from .core import alpha_slope, beta_weight, link_mu, link_mu_dot
from .design import Design, design_fisher
from .errors import InvalidConfig, NotConverged, PackingFailed

PACKING_RETRIES = 10**5
FIXED_POINT_DAMPING = 0.5
CONSTRAINT_TOL = 1e-6
EXHAUSTIVE_LIMIT = 1000
CLOSEST_ALTERNATES = 256


# ---------------------------------------------------------------------------
# hard instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HardInstance:
    decision_arms: np.ndarray
    theta_family: np.ndarray
    s_norm: float
    epsilon: float
    u_angle: float
    delta2: float
    packing: np.ndarray = field(repr=False, default=None)
    n_uncapped: float = math.nan

    @property
    def n(self):
        return self.decision_arms.shape[0]


def hard_instance_size(d, epsilon, n_cap=512):
    """``min(n_cap, floor(e^{eps^2 d / 4}))``."""
    return int(min(n_cap, math.floor(math.exp(epsilon**2 * d / 4.0))))


def build_hard_instance(d, epsilon, delta2="auto", n_cap=512, packing_seed=0,
                        retries=PACKING_RETRIES):
    """Decision arms ``z_i = (cos u, sin u a_i)`` and parameters
    ``theta_i = S (-cos u, sin u a_i)`` from a packing ``|a_i^T a_j| <= eps``.

    ``u = atan(sqrt(2 / (1 + eps)))`` and ``S = (3+eps)/(1-eps) log((1-d2)/d2)``
    with ``d2 = 1/(2n)`` when ``delta2 == "auto"``.
    """
    if d < 4:
        raise InvalidConfig("need d >= 4")
    if not 0 < epsilon <= 0.5:
        raise InvalidConfig("epsilon must lie in (0, 1/2]")
    n = hard_instance_size(d, epsilon, n_cap)
    if n < 1:
        raise InvalidConfig("instance would be empty")
    packs = []
    for i in range(n):
        rng = np.random.default_rng([packing_seed, i])
        for _ in range(retries):
            a = rng.normal(size=d - 1)
            a /= np.linalg.norm(a)
            if not packs or np.max(np.abs(np.array(packs) @ a)) <= epsilon:
                packs.append(a)
                break
        else:
            raise PackingFailed(f"packing stalled after {i} vectors", achieved=i)
    A = np.array(packs)
    if delta2 == "auto":
        delta2 = 1.0 / (2 * n)
    delta2 = float(delta2)
    if not 0 < delta2 < 0.5:
        raise InvalidConfig("delta2 must lie in (0, 1/2)")
    u = math.atan(math.sqrt(2.0 / (1.0 + epsilon)))
    s_norm = (3 + epsilon) / (1 - epsilon) * math.log((1 - delta2) / delta2)
    Z = np.hstack([np.full((n, 1), math.cos(u)), math.sin(u) * A])
    Th = s_norm * np.hstack([np.full((n, 1), -math.cos(u)), math.sin(u) * A])
    return HardInstance(Z, Th, s_norm, float(epsilon), u, delta2, A,
                        math.exp(epsilon**2 * d / 4.0))


def inner_product_brackets(inst):
    """Diagonal values ``z_i^T theta_i / S`` and the off-diagonal range."""
    P = inst.decision_arms @ inst.theta_family.T / inst.s_norm
    diag = np.diag(P)
    off = P[~np.eye(inst.n, dtype=bool)]
    return diag, off


def kappa0_diagnostic(inst):
    """Direct ``1/min_{i,j} mu'(z_i^T theta_j)`` and its closed-form upper bound."""
    P = inst.decision_arms @ inst.theta_family.T
    direct = 1.0 / float(np.min(link_mu_dot(P)))
    e = inst.epsilon
    ratio = (1 - inst.delta2) / inst.delta2
    bound = 2.0 * (1.0 + ratio ** ((1 + 3 * e) / (1 - e)))
    return direct, bound


def moderate_confidence_floor(inst):
    """``n / 16`` with the kappa0 diagnostic; ``n`` is the (possibly capped) |Z|."""
    direct, bound = kappa0_diagnostic(inst)
    return {
        "floor": inst.n / 16.0,
        "n": inst.n,
        "n_uncapped": inst.n_uncapped,
        "capped": bool(inst.n < math.floor(inst.n_uncapped)),
        "kappa0_inv": direct,
        "kappa0_inv_bound": bound,
        "kappa0_bound_holds": bool(direct <= bound * (1 + 1e-12)),
        "note": ("n is capped; the family is smaller than the e^{eps^2 d/4} construction"
                 if inst.n < math.floor(inst.n_uncapped) else "uncapped"),
    }


# ---------------------------------------------------------------------------
# KL and weighted matrices
# ---------------------------------------------------------------------------

def kl_bernoulli_logistic(x, theta1, theta2):
    """KL(Bern(mu(x^T th1)) || Bern(mu(x^T th2))) in closed form.

    ``mu(a)(a - b) + log(1 - mu(a)) - log(1 - mu(b))`` with ``a = x^T th1``,
    ``b = x^T th2``; vectorized over rows of ``x``.
    """
    x = np.asarray(x, dtype=float)
    a = x @ np.asarray(theta1, dtype=float)
    b = x @ np.asarray(theta2, dtype=float)
    kl = link_mu(a) * (a - b) - np.logaddexp(0.0, a) + np.logaddexp(0.0, b)
    return np.maximum(kl, 0.0)


def weighted_matrices(design, theta1, theta2):
    """``G = sum lam alpha(x, th1, th2) x x^T`` and ``K = sum lam beta(x^T th1, x^T th2) x x^T``."""
    X = design.arms
    a = X @ np.asarray(theta1, dtype=float)
    b = X @ np.asarray(theta2, dtype=float)
    wa = design.weights * alpha_slope(X, theta1, theta2)
    wb = design.weights * beta_weight(a, b)
    G = (X * wa[:, None]).T @ X
    K = (X * wb[:, None]).T @ X
    return G, K


# ---------------------------------------------------------------------------
# alternative parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AltProjection:
    theta_z: np.ndarray
    fixed_point_residual: float
    converged: bool
    iterations: int = 0
    fallback: bool = False


def gaussian_projection(design, theta_star, v):
    """``theta* - (v^T theta*) H^+ v / ||v||^2_{H^+}`` with ``H = H(lam, theta*)``."""
    H = design_fisher(design, theta_star)
    Hp = psd_pinv(H)
    return theta_star - float(v @ theta_star) * (Hp @ v) / float(v @ Hp @ v)


def _rhs(design, theta_star, theta, v):
    G, _ = weighted_matrices(design, theta, theta_star)
    Gp = psd_pinv(G)
    Gv = Gp @ v
    return theta_star - float(v @ theta_star) * Gv / float(v @ Gv)


def project_alternative(design, theta_star, z_star, z, max_iters=500, tol=1e-8,
                        damping=FIXED_POINT_DAMPING, init=None, raise_on_failure=True):
    """Damped fixed-point iteration for the closest alternative ``theta_z``.

    ``theta <- (1 - rho) theta + rho (theta* - (v^T theta*) G^+ v / ||v||^2_{G^+})``
    with ``v = z* - z`` and ``G = G(lam, theta, theta*)``, started from the
    Gaussian-limit projection.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    v = np.asarray(z_star, dtype=float) - np.asarray(z, dtype=float)
    if not np.any(v):
        raise InvalidConfig("z must differ from z*")
    theta = gaussian_projection(design, theta_star, v) if init is None else np.asarray(init, float)
    resid = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        rhs = _rhs(design, theta_star, theta, v)
        resid = float(np.linalg.norm(rhs - theta))
        theta = (1 - damping) * theta + damping * rhs
        if resid <= tol:
            break
    rhs = _rhs(design, theta_star, theta, v)
    resid = float(np.linalg.norm(rhs - theta))
    converged = resid <= tol * 10 and abs(float(theta @ v)) <= CONSTRAINT_TOL
    if converged:
        theta = rhs  # exact constraint saturation
    elif raise_on_failure:
        err = NotConverged(f"fixed point residual {resid:.3e} after {it} iterations", resid)
        raise err
    return AltProjection(theta, resid, bool(converged), it)


# ---------------------------------------------------------------------------
# transportation bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransportationResult:
    value: float
    c_value: float
    design: Design
    contributions: dict
    all_converged: bool
    iterations: int
    delta: float
    alternates: tuple

    def to_dict(self, instance=None):
        out = {
            "delta": self.delta,
            "value": self.value,
            "c_value": self.c_value,
            "design_support": {int(i): float(self.design.weights[i]) for i in self.design.support},
            "contributions": {str(k): v for k, v in sorted(self.contributions.items())},
            "all_converged": self.all_converged,
            "iterations": self.iterations,
            "estimate": "numeric max-min estimate, not a certified bound",
        }
        if instance is not None:
            out["instance_hash"] = instance_hash(instance)
        return out

    def to_json(self, instance=None):
        return json.dumps(self.to_dict(instance), sort_keys=True)


def instance_hash(instance):
    h = hashlib.sha256()
    for arr in (instance.measurement_arms, instance.decision_arms, instance.theta_star):
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return h.hexdigest()[:16]


def _alternate_costs(design, theta_star, Z, zs, alts, init):
    """Per-alternate ``(cost, kl_vector, theta_z, converged)`` at the design."""
    out = {}
    X = design.arms
    for j in alts:
        proj = project_alternative(design, theta_star, Z[zs], Z[j], init=init.get(j),
                                   raise_on_failure=False)
        theta_z, ok = proj.theta_z, proj.converged
        if not ok:
            theta_z = gaussian_projection(design, theta_star, Z[zs] - Z[j])
        kl = kl_bernoulli_logistic(X, theta_star, theta_z)
        out[j] = (float(design.weights @ kl), kl, theta_z, ok)
    return out


def transportation_value(design, instance, delta, alternates=None):
    """``log(1/(2.4 delta)) / c(lam)`` at a fixed design."""
    Z, th = instance.decision_arms, instance.theta_star
    zs = instance.best_arm
    alts = [j for j in range(Z.shape[0]) if j != zs] if alternates is None else alternates
    costs = _alternate_costs(design, th, Z, zs, alts, {})
    c = min(v[0] for v in costs.values())
    return math.log(1.0 / (2.4 * delta)) / c, c


def transportation_lower_bound(instance, delta, max_iters=200, rel_tol=1e-4, exhaustive=False,
                               init=None):
    """Maximize ``c(lam) = min_z sum_x lam_x KL(theta* || theta_z)_x`` over the simplex.

    Frank-Wolfe: at each iterate the alternatives are re-projected, the
    gradient of a soft-min over alternates (the per-arm KL vectors, by the
    envelope theorem) picks a vertex, and the step is ``2/(it+2)``. Stops
    after ``max_iters`` or when ``c`` changes by less than ``rel_tol``
    relative. Returns ``log(1/(2.4 delta)) / c`` at the best design found.
    """
    if not 0 < delta < 1 / 2.4:
        raise InvalidConfig("delta must lie in (0, 1/2.4)")
    X, Z, th = instance.measurement_arms, instance.decision_arms, instance.theta_star
    zs = instance.best_arm
    alts = [j for j in range(Z.shape[0]) if j != zs]
    if not alts:
        raise InvalidConfig("need at least two decision arms")
    if len(alts) > EXHAUSTIVE_LIMIT and not exhaustive:
        gaps = instance.gaps
        alts = sorted(alts, key=lambda j: (gaps[j], j))[:CLOSEST_ALTERNATES]
    n = X.shape[0]
    lam = np.full(n, 1.0 / n) if init is None else np.asarray(init, dtype=float)
    warm = {}
    best = (-math.inf, lam, None)
    prev_c = None
    it = 0
    for it in range(1, max_iters + 1):
        design = Design(X, lam / lam.sum())
        costs = _alternate_costs(design, th, Z, zs, alts, warm)
        warm = {j: v[2] for j, v in costs.items()}
        c = min(v[0] for v in costs.values())
        if c > best[0]:
            best = (c, design.weights.copy(), costs)
        if prev_c is not None and abs(c - prev_c) <= rel_tol * abs(prev_c):
            break
        prev_c = c
        vals = np.array([costs[j][0] for j in alts])
        temp = 50.0 / max(c, 1e-300)
        p = np.exp(-temp * (vals - vals.min()))
        p /= p.sum()
        grad = sum(pj * costs[j][1] for pj, j in zip(p, alts))
        vertex = int(np.argmax(grad))
        step = 2.0 / (it + 2.0)
        lam = (1 - step) * lam
        lam[vertex] += step
    c, w, costs = best
    design = Design(X, w)
    return TransportationResult(
        value=math.log(1.0 / (2.4 * delta)) / c,
        c_value=c,
        design=design,
        contributions={j: v[0] for j, v in costs.items()},
        all_converged=all(v[3] for v in costs.values()),
        iterations=it,
        delta=float(delta),
        alternates=tuple(alts),
    )
