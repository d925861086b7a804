"""Experimental design on the simplex: G-optimal and Fisher-weighted
max-variance objectives, a Frank-Wolfe solver, and integer rounding."""

from __future__ import annotations

import enum
import io
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import PINV_RCOND, outside_range, psd_eig, quad_forms
from .core import link_mu_dot
from .errors import InvalidConfig, NoSpanningSupport, TooFewSamples

WEIGHT_TOL = 1e-9
SUPPORT_FLOOR = 1e-9


class ObjectiveKind(enum.Enum):
    G_OPTIMAL = "GOptimal"
    MAX_DIRECTION_H = "MaxDirectionH"
    MAX_PAIR_H = "MaxPairH"


@dataclass(frozen=True)
class Design:
    """Simplex weights over a fixed list of candidate arms.

    Arms with zero weight stay in ``arms`` so indices remain stable; the
    support is ``weights > 0``. Solver outputs also carry the achieved
    objective value and the final Frank-Wolfe gap.
    """

    arms: np.ndarray
    weights: np.ndarray
    value: float | None = None
    fw_gap: float | None = None
    iterations: int = 0
    objective_kind: str | None = None

    def __post_init__(self):
        arms = np.atleast_2d(np.asarray(self.arms, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != arms.shape[0]:
            raise InvalidConfig("one weight per arm required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidConfig("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, arms):
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        return cls(arms, np.full(arms.shape[0], 1.0 / arms.shape[0]))

    @classmethod
    def point_mass(cls, arms, index):
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        w = np.zeros(arms.shape[0])
        w[index] = 1.0
        return cls(arms, w)

    @property
    def dim(self):
        return self.arms.shape[1]

    @property
    def support(self):
        return np.flatnonzero(self.weights > 0)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["arm_id", "weight"])
        for i, w in enumerate(self.weights):
            writer.writerow([i, repr(float(w))])
        return buf.getvalue()

    def to_dict(self):
        return {
            "arms": self.arms.tolist(),
            "weights": self.weights.tolist(),
            "objective_kind": self.objective_kind,
            "value": self.value,
            "fw_gap": self.fw_gap,
            "iterations": self.iterations,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class DesignObjective:
    """``scale * max_v v^T M(lambda)^+ v`` over the candidate ``arms``.

    ``M`` is ``A(lambda)`` for GOptimal and ``H(lambda, theta)`` otherwise.
    Directions: GOptimal uses the arms themselves; MaxDirectionH uses
    ``directions`` (defaults to the arms); MaxPairH uses every difference
    ``z - z'`` of the points in ``directions``.
    """

    kind: ObjectiveKind
    arms: np.ndarray
    theta: np.ndarray | None = None
    directions: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        kind = ObjectiveKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "arms", np.atleast_2d(np.asarray(self.arms, dtype=float)))
        if kind is ObjectiveKind.G_OPTIMAL:
            if self.theta is not None:
                raise InvalidConfig("GOptimal takes no theta")
        elif self.theta is None:
            raise InvalidConfig(f"{kind.value} requires theta")
        if self.theta is not None:
            object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).reshape(-1))
        if self.directions is not None:
            object.__setattr__(self, "directions", np.atleast_2d(np.asarray(self.directions, dtype=float)))
        if kind is ObjectiveKind.MAX_PAIR_H and self.directions is None:
            raise InvalidConfig("MaxPairH requires the point set in `directions`")
        if not self.scale > 0:
            raise InvalidConfig("scale must be positive")

    def arm_weights(self):
        """Per-arm multiplier of ``x x^T`` in ``M``."""
        if self.kind is ObjectiveKind.G_OPTIMAL:
            return np.ones(self.arms.shape[0])
        return link_mu_dot(self.arms @ self.theta)

    def query_vectors(self):
        if self.kind is ObjectiveKind.G_OPTIMAL:
            return self.arms
        if self.kind is ObjectiveKind.MAX_DIRECTION_H:
            return self.arms if self.directions is None else self.directions
        return pair_differences(self.directions)


def pair_differences(points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    i, j = np.triu_indices(points.shape[0], k=1)
    if i.size == 0:
        return np.zeros((0, points.shape[1]))
    return points[i] - points[j]


def r_eps(d, epsilon, variant="appendix"):
    """Minimum sample count for rounding: (d(d+1)+2)/eps, or d^2/eps."""
    if not epsilon > 0:
        raise InvalidConfig("epsilon must be positive")
    if variant == "appendix":
        return (d * (d + 1) + 2) / epsilon
    if variant == "main":
        return d * d / epsilon
    raise InvalidConfig(f"unknown r(eps) variant {variant!r}")


def design_gram(design):
    X = design.arms
    return (X * design.weights[:, None]).T @ X


def design_fisher(design, theta):
    X = design.arms
    w = design.weights * link_mu_dot(X @ np.asarray(theta, dtype=float))
    return (X * w[:, None]).T @ X


def _as_list(obj):
    if isinstance(obj, DesignObjective):
        return [obj]
    objs = list(obj)
    if not objs:
        raise InvalidConfig("at least one objective required")
    return objs


def eval_objective(design, obj):
    """Objective value at ``design``; a list of objectives is combined by max.

    Directions outside the range of the weighted Gram matrix give +inf.
    """
    best = -np.inf
    for o in _as_list(obj):
        w = design.weights * o.arm_weights()
        M = (o.arms * w[:, None]).T @ o.arms
        V = o.query_vectors()
        if V.shape[0] == 0:
            val = 0.0
        else:
            val = o.scale * float(np.max(quad_forms(M, V)))
        best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# Frank-Wolfe
# ---------------------------------------------------------------------------

class _Term:
    """One objective in span coordinates: ``s * max_v v^T M^{-1} v`` with
    ``M = sum_x lam_x u_x u_x^T``."""

    def __init__(self, U, V, scale):
        self.U, self.V, self.s = U, V, scale


class _Problem:
    """Stacked view of several objectives sharing one candidate arm list,
    expressed in an orthonormal basis of the arms' span."""

    def __init__(self, objectives):
        arms = objectives[0].arms
        for o in objectives[1:]:
            if o.arms.shape != arms.shape or not np.array_equal(o.arms, arms):
                raise InvalidConfig("combined objectives must share the candidate arms")
        self.arms = arms
        _, sv, Vt = np.linalg.svd(arms, full_matrices=False)
        rank = int(np.sum(sv > PINV_RCOND**0.5 * sv[0])) if sv.size and sv[0] > 0 else 0
        if rank == 0:
            raise NoSpanningSupport("candidate arms are all zero")
        Q = Vt[:rank].T
        self.terms = []
        for o in objectives:
            V = o.query_vectors()
            if not V.shape[0]:
                continue
            if np.any(outside_range(V, Q)):
                raise NoSpanningSupport("a query direction lies outside the span of the arms")
            w = o.arm_weights()
            U = (arms @ Q) * np.sqrt(w)[:, None]
            self.terms.append(_Term(U, V @ Q, o.scale))

    def state(self, lam):
        """Pseudo-inverses and per-direction values at ``lam``.

        Returns None when some direction leaves the range of ``M`` (objective
        +inf). Each entry is ``(Minv, P, q, full_rank)``.
        """
        out = []
        for t in self.terms:
            M = (t.U * lam[:, None]).T @ t.U
            w, E = np.linalg.eigh(M)
            if w[-1] <= 0:
                return None
            keep = w > PINV_RCOND * w[-1]
            Ek = E[:, keep]
            coef = t.V @ Ek
            if np.any(outside_range(t.V, Ek, coef)):
                return None
            Minv = (Ek / w[keep]) @ Ek.T
            P = t.V @ Minv
            q = np.einsum("ij,ij->i", P, t.V)
            out.append((Minv, P, q, bool(keep.all())))
        return out

    def exact(self, st):
        if st is None:
            return np.inf
        return max(t.s * float(e[2].max()) for t, e in zip(self.terms, st))

    @staticmethod
    def smooth(vals, beta):
        top = vals.max()
        z = beta * (vals / top - 1.0)
        lse = np.log(np.sum(np.exp(z)))
        return top * (1.0 + lse / beta), np.exp(z - lse)

    def gradient(self, st, p):
        g = np.zeros(self.arms.shape[0])
        off = 0
        for t, (_, P, _, _) in zip(self.terms, st):
            m = t.V.shape[0]
            proj = t.U @ P.T  # (arms, directions)
            g -= t.s * (proj**2) @ p[off:off + m]
            off += m
        return g

    def step_values(self, st, lam, j_in, j_out):
        """Function of ``gamma`` giving the scaled values after moving ``gamma`` mass.

        ``j_out is None``: Frank-Wolfe step ``(1-gamma) lam + gamma e_{j_in}``.
        Otherwise: pairwise step moving ``gamma`` from ``j_out`` to ``j_in``.
        Uses Sherman-Morrison/Woodbury on the current inverse; the
        gamma-independent products are formed once.
        """
        if not all(e[3] for e in st):
            # singular current matrix: evaluate exactly
            def exact(gamma):
                new_lam = lam * (1.0 - gamma) if j_out is None else lam.copy()
                new_lam[j_in] += gamma
                if j_out is not None:
                    new_lam[j_out] = max(new_lam[j_out] - gamma, 0.0)
                nst = self.state(new_lam)
                if nst is None:
                    return None
                return np.concatenate([t.s * e[2] for t, e in zip(self.terms, nst)])
            return exact
        pre = []
        for t, (Minv, P, q, _) in zip(self.terms, st):
            if j_out is None:
                u = t.U[j_in]
                pre.append((t.s, q, P @ u, float(u @ Minv @ u)))
            else:
                W = t.U[[j_in, j_out]]
                B = P @ W.T  # (m, 2)
                pre.append((t.s, q, B[:, 0], B[:, 1], W @ Minv @ W.T))

        def values(gamma):
            vals = []
            for item in pre:
                if j_out is None:
                    s_, q, b, g = item
                    if gamma >= 1.0:
                        return None
                    c = gamma / (1.0 - gamma)
                    new = (q - c * b**2 / (1.0 + c * g)) / (1.0 - gamma)
                else:
                    s_, q, b0, b1, G = item
                    det = (1 + gamma * G[0, 0]) * (1 - gamma * G[1, 1]) + gamma**2 * G[0, 1] ** 2
                    if det <= 1e-12:
                        return None
                    if gamma == 0.0:
                        new = q
                    else:
                        k00, k11, k01 = 1.0 / gamma + G[0, 0], -1.0 / gamma + G[1, 1], G[0, 1]
                        kdet = k00 * k11 - k01 * k01
                        new = q - (k11 * b0**2 - 2 * k01 * b0 * b1 + k00 * b1**2) / kdet
                if np.any(new <= 0):
                    return None
                vals.append(s_ * new)
            return np.concatenate(vals)
        return values


def _golden(fun, hi, iters=32):
    """Golden-section minimization of ``fun`` on ``[0, hi]``."""
    gr = (math.sqrt(5) - 1) / 2
    a, b = 0.0, hi
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = fun(d)
    best = c if fc <= fd else d
    return hi if fun(hi) < min(fc, fd) else best


def _g_optimal(obj, tol, max_iters, support_floor):
    """G-optimal design through its log-det equivalent.

    Frank-Wolfe with away steps on ``-log det A(lam)`` (Fedorov-Wynn exchange).
    The step toward or away from arm ``x`` with leverage ``l = x^T A^{-1} x``
    has the closed form ``(l - r) / (r (l - 1))``, and the duality gap is
    ``max_x l - r`` where ``r`` is the rank of the arm set, which is also the
    excess of the G-objective over its optimum.
    """
    prob = _Problem([obj])
    (t,) = prob.terms
    U = t.U
    n, r = U.shape
    lam = np.full(n, 1.0 / n)
    it = 0
    gap_rel = np.inf
    while it < max_iters:
        M = (U * lam[:, None]).T @ U
        lev = np.einsum("ij,ij->i", U @ np.linalg.inv(M), U)
        j_in = int(np.argmax(lev))
        gap_rel = (lev[j_in] - r) / r
        it += 1
        if gap_rel <= tol:
            break
        supp = np.flatnonzero(lam > 0)
        j_out = int(supp[np.argmin(lev[supp])])
        if r - lev[j_out] > lev[j_in] - r and lam[j_out] < 1.0:
            j, l = j_out, lev[j_out]
            lo = -lam[j] / (1.0 - lam[j])
            # for l <= 1 log det decreases along the whole segment: drop the arm
            gamma = lo if l <= 1.0 else max((l - r) / (r * (l - 1.0)), lo)
        else:
            j, l = j_in, lev[j_in]
            gamma = (l - r) / (r * (l - 1.0))
        lam = (1.0 - gamma) * lam
        lam[j] += gamma
        lam[lam < 1e-15] = 0.0
        lam /= lam.sum()
    lam[lam < support_floor] = 0.0
    lam /= lam.sum()
    d = Design(obj.arms, lam)
    return Design(obj.arms, lam, value=eval_objective(d, obj), fw_gap=max(float(gap_rel), 0.0),
                  iterations=it, objective_kind=obj.kind.value)


def minimize_design(objective, tol=1e-4, max_iters=5000, support_floor=SUPPORT_FLOOR,
                    init=None, betas=(30.0, 300.0, 3000.0)):
    """Minimize the objective (or the max over a list of objectives) over the simplex.

    Frank-Wolfe with away/pairwise steps and exact line search on a
    log-sum-exp smoothing of the max; the temperature is raised in stages
    and each stage warm-starts from the best iterate so far (measured by the
    exact objective). ``fw_gap`` on the result is the relative duality gap of
    the smoothed objective at the last iterate.
    """
    objs = _as_list(objective)
    if len(objs) == 1 and objs[0].kind is ObjectiveKind.G_OPTIMAL:
        return _g_optimal(objs[0], tol, max_iters, support_floor)
    prob = _Problem(objs)
    n = prob.arms.shape[0]
    kind = objs[0].kind.value
    if not prob.terms:
        return Design(prob.arms, np.full(n, 1.0 / n), value=0.0, fw_gap=0.0, objective_kind=kind)

    lam = np.full(n, 1.0 / n)
    if init is not None:
        cand = np.asarray(init, dtype=float)
        if prob.state(cand) is not None:
            lam = cand / cand.sum()
    st = prob.state(lam)
    if st is None:
        raise NoSpanningSupport("objective is infinite for every design on these arms")

    best_lam, best_val = lam.copy(), prob.exact(st)
    it_total, gap_rel = 0, np.inf
    for si, beta in enumerate(betas):
        last = si == len(betas) - 1
        stage_tol = tol if last else max(tol, 1.0 / beta)
        while it_total < max_iters:
            vals = np.concatenate([t.s * e[2] for t, e in zip(prob.terms, st)])
            f, p = prob.smooth(vals, beta)
            g = prob.gradient(st, p)
            s_idx = int(np.argmin(g))
            supp = np.flatnonzero(lam > 0)
            a_idx = int(supp[np.argmax(g[supp])])
            gap = float(lam @ g - g[s_idx])
            gap_rel = gap / f
            it_total += 1
            if gap_rel <= stage_tol:
                break
            if a_idx != s_idx and g[a_idx] - g[s_idx] > gap:
                j_out, hi = a_idx, lam[a_idx]
            else:
                j_out, hi = None, 1.0 - 1e-12

            def make_phi(j_out):
                step = prob.step_values(st, lam, s_idx, j_out)

                def phi(gamma):
                    v = step(gamma)
                    return np.inf if v is None else prob.smooth(v, beta)[0]
                return phi

            phi = make_phi(j_out)
            gamma = _golden(phi, hi)
            if not phi(gamma) < f and j_out is not None:
                j_out, hi = None, 1.0 - 1e-12
                phi = make_phi(None)
                gamma = _golden(phi, hi)
            if not phi(gamma) < f:
                break
            if j_out is None:
                lam = (1.0 - gamma) * lam
                lam[s_idx] += gamma
            else:
                lam = lam.copy()
                lam[s_idx] += gamma
                lam[j_out] -= gamma
                if lam[j_out] < 1e-15:
                    lam[j_out] = 0.0
            lam = np.clip(lam, 0.0, None)
            lam /= lam.sum()
            new_st = prob.state(lam)
            if new_st is None:
                lam = best_lam.copy()
                st = prob.state(lam)
                break
            st = new_st
            val = prob.exact(st)
            if val < best_val:
                best_lam, best_val = lam.copy(), val
        if it_total >= max_iters:
            break

    lam = best_lam.copy()
    lam[lam < support_floor] = 0.0
    lam /= lam.sum()
    final = prob.state(lam)
    if final is None:
        lam = best_lam
        final = prob.state(lam)
    return Design(prob.arms, lam, value=prob.exact(final), fw_gap=max(float(gap_rel), 0.0),
                  iterations=it_total, objective_kind=kind)


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundedAllocation:
    counts: np.ndarray
    n: int
    epsilon: float
    arms: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.sum() != self.n or np.any(c < 0):
            raise InvalidConfig("counts must be nonnegative and sum to n")
        object.__setattr__(self, "counts", c)

    def as_dict(self):
        return {i: int(c) for i, c in enumerate(self.counts) if c > 0}


def apportion(weights, n):
    """Efficient apportionment of ``n`` samples to simplex ``weights``.

    Counts start at ``ceil((n - p/2) w)`` on the ``p``-point support and are
    then repaired one unit at a time: increment the arm with the smallest
    ``count / w`` or decrement the arm with the largest ``(count - 1) / w``.
    """
    w = np.asarray(weights, dtype=float)
    supp = np.flatnonzero(w > 0)
    p = supp.size
    counts = np.zeros(w.shape[0], dtype=np.int64)
    ws = w[supp]
    c = np.ceil((n - p / 2.0) * ws - 1e-12).astype(np.int64)
    c = np.maximum(c, 0)
    while c.sum() < n:
        j = int(np.argmin(c / ws))
        c[j] += 1
    while c.sum() > n:
        j = int(np.argmax((c - 1) / ws))
        c[j] -= 1
    counts[supp] = c
    return counts


def round_design(design, n, epsilon, r_variant="appendix"):
    """Integer allocation of ``n`` samples to ``design``; requires ``n >= r(eps)``."""
    n = int(n)
    r = r_eps(design.dim, epsilon, r_variant)
    if n < r - 1e-9:
        raise TooFewSamples(f"n={n} < r(eps)={r:.3f}")
    counts = apportion(design.weights, n)
    return RoundedAllocation(counts, n, float(epsilon), design.arms)


def allocation_fisher(alloc, theta):
    X = alloc.arms
    w = alloc.counts * link_mu_dot(X @ np.asarray(theta, dtype=float))
    return (X * w[:, None]).T @ X


def rounding_slack(design, alloc, theta):
    """min eigenvalue of ``H_alloc(theta) - n/(1+eps) H(lambda, theta)``."""
    D = allocation_fisher(alloc, theta) - alloc.n / (1 + alloc.epsilon) * design_fisher(design, theta)
    return float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])
