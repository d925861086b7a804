"""K-armed contextual logistic bandits: SupLogistic and a uniform baseline."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._linalg import quad_forms_projected
from .confidence import TRUE_VARIANCE_CONST, VARIANCE_SANDWICH
from .core import LogisticDataset, fit_mle, link_mu, link_mu_dot
from .errors import EmptyBucket, InvalidConfig

BRANCH_EXPLORE = "a"
BRANCH_EXPLOIT = "b"
BRANCH_FILTER = "c"
BRANCH_BURN_IN = "burn-in"
BRANCH_UNIFORM = "uniform"

# stream ids for the per-step keyed generators
_CONTEXT_STREAM, _REWARD_STREAM, _CHOICE_STREAM = 0, 1, 2


@dataclass(frozen=True)
class ContextModel:
    """Per-step arm sets, either Gaussian or drawn from a finite pool.

    Gaussian mode draws ``K`` vectors from ``N(0, I/d)`` and scales any with
    norm above one back onto the unit sphere. Pool mode picks one of the
    supplied ``(K, d)`` arm sets uniformly. The arm set at step ``t`` depends
    only on ``(seed, t)``.
    """

    d: int
    K: int
    theta_star: np.ndarray
    pool: tuple = field(default=())

    def __post_init__(self):
        if self.d < 1 or self.K < 1:
            raise InvalidConfig("d and K must be positive")
        th = np.asarray(self.theta_star, dtype=float).reshape(-1)
        if th.size != self.d:
            raise InvalidConfig("theta_star has the wrong dimension")
        pool = tuple(np.atleast_2d(np.asarray(p, dtype=float)) for p in self.pool)
        for p in pool:
            if p.shape != (self.K, self.d):
                raise InvalidConfig("every pooled arm set must be (K, d)")
            if np.any(np.linalg.norm(p, axis=1) > 1 + 1e-9):
                raise InvalidConfig("pooled arms must lie in the unit ball")
        object.__setattr__(self, "theta_star", th)
        object.__setattr__(self, "pool", pool)

    def arm_set(self, t, seed):
        rng = np.random.default_rng([seed, _CONTEXT_STREAM, t])
        if self.pool:
            return self.pool[int(rng.integers(len(self.pool)))]
        X = rng.normal(scale=1.0 / math.sqrt(self.d), size=(self.K, self.d))
        norms = np.linalg.norm(X, axis=1)
        return X / np.maximum(norms, 1.0)[:, None]

    def reward(self, x, t, seed):
        rng = np.random.default_rng([seed, _REWARD_STREAM, t])
        return int(rng.random() < float(link_mu(x @ self.theta_star)))

    def kappa(self):
        """mu'(||theta*||), the unit-ball worst case."""
        return float(link_mu_dot(np.linalg.norm(self.theta_star)))


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass
class RegretTrace:
    T: int
    chosen: np.ndarray
    best: np.ndarray
    regret: np.ndarray
    level: np.ndarray
    branch: list
    meta: dict = field(default_factory=dict)
    events: list = field(default_factory=list)

    @property
    def cumulative(self):
        return np.cumsum(self.regret)

    @property
    def final_regret(self):
        return float(self.regret.sum())

    def branch_histogram(self):
        return dict(sorted(Counter(self.branch).items()))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "level", "branch", "arm", "regret", "cum_regret"])
        cum = self.cumulative
        for i in range(self.T):
            w.writerow([i + 1, int(self.level[i]), self.branch[i], int(self.chosen[i]),
                        repr(float(self.regret[i])), repr(float(cum[i]))])
        return buf.getvalue()

    def summary(self):
        out = {"T": self.T, "final_regret": self.final_regret,
               "branch_counts": self.branch_histogram()}
        out.update(self.meta)
        return out

    def summary_json(self):
        return json.dumps(self.summary(), sort_keys=True)


def pseudo_regret(arm_sets, chosen, theta_star):
    """Per-step ``mu(x_{t,a*}^T theta*) - mu(x_{t,a_t}^T theta*)`` and its running sum."""
    arm_sets = np.asarray(arm_sets, dtype=float)
    chosen = np.asarray(chosen, dtype=int)
    means = link_mu(arm_sets @ np.asarray(theta_star, dtype=float))
    inst = means.max(axis=1) - means[np.arange(chosen.size), chosen]
    inst = np.maximum(inst, 0.0)
    return inst, np.cumsum(inst)


def _step_regret(X, a, theta_star):
    means = link_mu(X @ theta_star)
    best = int(np.argmax(means))
    return best, max(float(means[best] - means[a]), 0.0)


def uniform_policy(model, T, seed):
    """Pull a uniformly random arm at every step."""
    chosen = np.zeros(T, dtype=int)
    best = np.zeros(T, dtype=int)
    regret = np.zeros(T)
    for t in range(1, T + 1):
        X = model.arm_set(t, seed)
        a = int(np.random.default_rng([seed, _CHOICE_STREAM, t]).integers(model.K))
        chosen[t - 1] = a
        best[t - 1], regret[t - 1] = _step_regret(X, a, model.theta_star)
    return RegretTrace(T, chosen, best, regret, np.zeros(T, dtype=int), [BRANCH_UNIFORM] * T,
                       {"policy": "uniform"})


# ---------------------------------------------------------------------------
# SupLogistic
# ---------------------------------------------------------------------------

def schedule(d, T, K, delta):
    """``S = floor(log2 T)``, ``tau = ceil(sqrt(dT))`` rounded up to a multiple of
    ``S + 1``, and ``alpha = 3.5 sqrt(ln(2 (2 + tau) 2 S T K / delta))``."""
    S = int(math.floor(math.log2(T)))
    tau = math.ceil(math.sqrt(d * T))
    tau = (S + 1) * math.ceil(tau / (S + 1))
    alpha = TRUE_VARIANCE_CONST * math.sqrt(math.log(2 * (2 + tau) * 2 * S * T * K / delta))
    return S, tau, alpha


def burn_in_terms(d, K, delta, kappa):
    """The main-text and appendix versions of the T0 scale term ``Z``."""
    tail = math.log(K / delta) ** 2 / (d * kappa**2)
    return {"Z_main": d / kappa**2 + tail, "Z_appendix": d**3 / kappa**2 + tail}


class _Bucket:
    """Growing sample list with a cached MLE and a Fisher matrix at theta_Phi."""

    def __init__(self, d, capacity):
        self.X = np.zeros((capacity, d))
        self.y = np.zeros(capacity, dtype=np.int64)
        self.steps = np.zeros(capacity, dtype=np.int64)
        self.n = 0
        self.theta = np.zeros(d)
        self.fitted_n = -1
        self.H = np.zeros((d, d))

    def add(self, x, y, t):
        if self.n == self.X.shape[0]:
            grow = max(16, self.n)
            self.X = np.vstack([self.X, np.zeros((grow, self.X.shape[1]))])
            self.y = np.concatenate([self.y, np.zeros(grow, dtype=np.int64)])
            self.steps = np.concatenate([self.steps, np.zeros(grow, dtype=np.int64)])
        self.X[self.n], self.y[self.n], self.steps[self.n] = x, y, t
        self.n += 1

    def data(self):
        return LogisticDataset.from_samples(self.X[:self.n], self.y[:self.n])

    def refit(self):
        """Refit the MLE if samples arrived; returns a separation flag."""
        if self.fitted_n == self.n or self.n == 0:
            return False
        fit = fit_mle(self.data())
        self.fitted_n = self.n
        if fit.separation_detected:
            return True
        self.theta = fit.theta
        return False

    def add_fisher(self, x, theta_phi):
        self.H += float(link_mu_dot(x @ theta_phi)) * np.outer(x, x)

    def rebuild_fisher(self, theta_phi):
        X = self.X[:self.n]
        w = link_mu_dot(X @ theta_phi)
        self.H = (X * w[:, None]).T @ X


def compute_mean_width(X, theta_s, H_s, alpha):
    """``m = <x, theta^(s)>`` and ``w = alpha sqrt(2.2) ||x||_{H^(s)(theta_Phi)^+}`` per row."""
    H_s = np.asarray(H_s, dtype=float)
    if not np.any(H_s):
        raise EmptyBucket("bucket has no samples")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X @ theta_s
    w = alpha * math.sqrt(VARIANCE_SANDWICH) * np.sqrt(quad_forms_projected(H_s, X))
    return m, w


@dataclass(frozen=True)
class SupLogisticOptions:
    alpha: float | None = None  # override of the theoretical exploration rate
    tau: int | None = None  # override of the burn-in length (rounded to a multiple of S+1)
    check_provenance: bool = True


def sup_logistic(model, T, delta, seed, opts=SupLogisticOptions()):
    """Run SupLogistic for ``T`` steps; the context stream is keyed by ``seed``."""
    d, K = model.d, model.K
    if T < d:
        raise InvalidConfig("need T >= d")
    if K < 2:
        raise InvalidConfig("need K >= 2")
    if not 0 < delta < 1:
        raise InvalidConfig("delta must lie in (0, 1)")
    S, tau, alpha = schedule(d, T, K, delta)
    if opts.tau is not None:
        tau = (S + 1) * math.ceil(opts.tau / (S + 1))
    if opts.alpha is not None:
        alpha = float(opts.alpha)
    if tau < S + 1:
        raise InvalidConfig("burn-in too short to seed every bucket")
    tau = min(tau, T)

    cap = max(16, tau // (S + 1) + 16)
    # buckets[0] is Psi_0, buckets[1..S] are Psi_s, buckets[S+1] is Phi
    buckets = [_Bucket(d, cap) for _ in range(S + 2)]
    chosen = np.zeros(T, dtype=int)
    best = np.zeros(T, dtype=int)
    regret = np.zeros(T)
    level = np.zeros(T, dtype=int)
    branch = []
    events = []
    owner = np.full(T + 1, -1, dtype=int)  # bucket each committed step went to

    for t in range(1, tau + 1):
        X = model.arm_set(t, seed)
        a = int(np.random.default_rng([seed, _CHOICE_STREAM, t]).integers(K))
        y = model.reward(X[a], t, seed)
        b = ((t - 1) % (S + 1)) + 1
        buckets[b].add(X[a], y, t)
        owner[t] = b
        chosen[t - 1] = a
        best[t - 1], regret[t - 1] = _step_regret(X, a, model.theta_star)
        branch.append(BRANCH_BURN_IN)

    phi = buckets[S + 1]
    if phi.refit():
        events.append({"t": tau, "bucket": "phi", "event": "separation"})
    theta_phi = phi.theta
    for s in range(1, S + 1):
        buckets[s].rebuild_fisher(theta_phi)

    inv_sqrt_T = 1.0 / math.sqrt(T)
    for t in range(tau + 1, T + 1):
        X = model.arm_set(t, seed)
        A = np.arange(K)
        s = 1
        a_t, br, target = None, None, None
        while a_t is None:
            bk = buckets[s]
            if bk.refit():
                events.append({"t": t, "bucket": s, "event": "separation"})
            if opts.check_provenance:
                assert np.all(owner[bk.steps[:bk.n]] == s)
            m, w = compute_mean_width(X[A], bk.theta, bk.H, alpha)
            thr = 2.0**-s
            over = np.flatnonzero(w > thr)
            if over.size:
                a_t, br, target = int(A[over[0]]), BRANCH_EXPLORE, s
            elif np.all(w <= inv_sqrt_T) or s == S:
                # at s = S every width is <= 2^-S <= 1/sqrt(T) for T >= 4
                a_t, br, target = int(A[int(np.argmax(m))]), BRANCH_EXPLOIT, 0
            else:
                A = A[m >= m.max() - 2.0 * thr]
                s += 1
        y = model.reward(X[a_t], t, seed)
        buckets[target].add(X[a_t], y, t)
        owner[t] = target
        if target >= 1:
            buckets[target].add_fisher(X[a_t], theta_phi)
        chosen[t - 1] = a_t
        best[t - 1], regret[t - 1] = _step_regret(X, a_t, model.theta_star)
        level[t - 1] = s
        branch.append(br)

    meta = {"policy": "SupLogistic", "tau": int(tau), "S": int(S), "alpha": float(alpha),
            "delta": float(delta), "K": int(K), "d": int(d)}
    meta.update(burn_in_terms(d, K, delta, model.kappa()))
    return RegretTrace(T, chosen, best, regret, level, branch, meta, events)
