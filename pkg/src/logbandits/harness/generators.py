"""Instance generators for the experiment harness."""

from __future__ import annotations

import itertools
import math

import numpy as np

from ..confidence import ConfidenceParams, gamma_d, xi_sq
from ..core import link_mu_dot
from ..errors import InvalidConfig
from ..pure_explore import TransductiveInstance

FIG1_ANGLE = 0.1
PAIRWISE_CAP = 5000


def gen_fig1_benchmark(d):
    """Basis vectors plus the near-duplicate ``cos(.1) e1 + sin(.1) e2``; theta* = e1."""
    if d < 2:
        raise InvalidConfig("need d >= 2")
    extra = np.zeros(d)
    extra[0], extra[1] = math.cos(FIG1_ANGLE), math.sin(FIG1_ANGLE)
    arms = np.vstack([np.eye(d), extra])
    theta = np.zeros(d)
    theta[0] = 1.0
    return TransductiveInstance(arms, arms.copy(), theta, instance_id=f"fig1-d{d}")


def _example_theta(r, eps):
    if r < 0 or eps <= 0:
        raise InvalidConfig("need r >= 0 and eps > 0")
    return np.array([r, r - eps], dtype=float)


def gen_example1(r, eps):
    """``X = Z = {e1, e2}``, ``theta* = (r, r - eps)``."""
    arms = np.eye(2)
    return TransductiveInstance(arms, arms.copy(), _example_theta(r, eps),
                                instance_id=f"example1-r{r:g}-eps{eps:g}")


def gen_example2(r, eps):
    """``X = {e1, e2, e1 - e2}``, ``Z = {e1, e2}``, ``theta* = (r, r - eps)``."""
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]])
    return TransductiveInstance(X, np.eye(2), _example_theta(r, eps),
                                instance_id=f"example2-r{r:g}-eps{eps:g}", allow_large_arms=True)


def gen_pairwise(n_items, d, seed, cap=PAIRWISE_CAP, theta_norm=1.0, return_pairs=False):
    """Random unit items ``Z`` and measurements ``X = {z_i - z_j : i < j}``.

    When there are more than ``cap`` pairs a seeded subset is kept (in pair
    order). ``theta*`` is a random direction scaled to ``theta_norm``.
    """
    if n_items < 2:
        raise InvalidConfig("need at least two items")
    rng = np.random.default_rng([seed, 0])
    Z = rng.normal(size=(n_items, d))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    theta = rng.normal(size=d)
    theta *= theta_norm / np.linalg.norm(theta)
    pairs = list(itertools.combinations(range(n_items), 2))
    if len(pairs) > cap:
        keep = np.sort(np.random.default_rng([seed, 1]).choice(len(pairs), cap, replace=False))
        pairs = [pairs[i] for i in keep]
    pairs = np.array(pairs, dtype=int)
    X = Z[pairs[:, 0]] - Z[pairs[:, 1]]
    inst = TransductiveInstance(X, Z, theta, instance_id=f"pairwise-n{n_items}-d{d}-s{seed}",
                                allow_large_arms=True)
    return (inst, pairs) if return_pairs else inst


def gaussian_rescale(d):
    """Constant ``c`` with ``P(||c g|| > 1)`` negligible for ``g ~ N(0, I/d)``."""
    return 1.0 / (1.0 + 3.0 / math.sqrt(d))


def gen_gaussian_burnin(d, s_norm, t, seed, delta=0.05, n_checkpoints=200):
    """Burn-in quantity ``xi^2`` for growing prefixes of ``t`` Gaussian arms.

    Arms are ``c g`` with ``g ~ N(0, I/d)`` (projected onto the unit ball in
    the rare case the norm still exceeds one); ``theta*`` is a random
    direction of norm ``s_norm``. ``xi^2`` is computed against the Fisher
    matrix at ``theta*`` on ``n_checkpoints`` evenly spaced prefixes (always
    including ``t/4``, ``t/2`` and ``t``); ``satisfied_at`` is the first
    checkpoint with ``xi^2 <= 1/gamma(d)``.
    """
    if d < s_norm**2:
        raise InvalidConfig("need d >= s_norm^2")
    if t < d:
        raise InvalidConfig("need t >= d")
    rng = np.random.default_rng([seed, 0])
    theta = rng.normal(size=d)
    theta *= s_norm / np.linalg.norm(theta)
    X = gaussian_rescale(d) * rng.normal(scale=1.0 / math.sqrt(d), size=(t, d))
    X /= np.maximum(np.linalg.norm(X, axis=1), 1.0)[:, None]
    w = link_mu_dot(X @ theta)
    grid = set(np.linspace(d, t, n_checkpoints).round().astype(int).tolist())
    grid |= {max(d, t // 4), max(d, t // 2), t}
    grid = sorted(grid)
    series = {}
    H = np.zeros((d, d))
    done = 0
    satisfied_at = None
    for n in grid:
        H += (X[done:n] * w[done:n, None]).T @ X[done:n]
        done = n
        xi = xi_sq(X[:n], H)
        series[n] = xi
        if satisfied_at is None and xi <= 1.0 / gamma_d(ConfidenceParams(delta, n, d)):
            satisfied_at = n
    return {"xi_sq_series": series, "satisfied_at": satisfied_at, "theta_star": theta}


def gen_coverage_instance(d, t, theta_norm=1.0, n_arms=None, instance_seed=0, epsilon=0.5):
    """Random unit arms, a G-optimal design rounded to ``t`` samples, a random
    ``theta*`` of norm ``theta_norm`` and a random unit test direction."""
    from ..confidence import CoverageInstance
    from ..design import DesignObjective, ObjectiveKind, minimize_design, round_design

    n_arms = 2 * d if n_arms is None else int(n_arms)
    if n_arms < d:
        raise InvalidConfig("need at least d arms")
    rng = np.random.default_rng([instance_seed, 0])
    X = rng.normal(size=(n_arms, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    theta = rng.normal(size=d)
    theta *= theta_norm / np.linalg.norm(theta)
    direction = rng.normal(size=d)
    direction /= np.linalg.norm(direction)
    design = minimize_design(DesignObjective(ObjectiveKind.G_OPTIMAL, X))
    alloc = round_design(design, int(t), epsilon)
    return CoverageInstance(X, alloc.counts, theta, direction,
                            instance_id=f"coverage-d{d}-t{t}-s{instance_seed}")
