"""Logistic link primitives, Fisher information and maximum-likelihood fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import psd_pinv
from .errors import InvalidInstance, NonFiniteLikelihood

ARM_NORM_TOL = 1e-9
ALPHA_EXACT_LIMIT = 1e-10
BETA_SERIES_LIMIT = 1e-6
BETA_QUADRATURE_LIMIT = 5e-2

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


# ---------------------------------------------------------------------------
# link function
# ---------------------------------------------------------------------------

def link_mu(z):
    """Logistic sigmoid, evaluated without overflow for any finite input."""
    z = np.asarray(z, dtype=float)
    if np.isnan(z).any():
        raise FloatingPointError("NaN passed to link_mu")
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def link_mu_dot(z):
    """Derivative of the sigmoid, ``mu(z) * (1 - mu(z))``."""
    z = np.asarray(z, dtype=float)
    if np.isnan(z).any():
        raise FloatingPointError("NaN passed to link_mu_dot")
    e = np.exp(-np.abs(z))
    out = e / (1.0 + e) ** 2
    return out if out.ndim else float(out)


def link_mu_ddot(z):
    z = np.asarray(z, dtype=float)
    return link_mu_dot(z) * (1.0 - 2.0 * link_mu(z))


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def _secant(a, b):
    """(mu(a) - mu(b)) / (a - b) computed through the tanh form.

    mu(a) - mu(b) = sinh((a-b)/2) / (2 cosh(a/2) cosh(b/2)), which has no
    cancellation for nearby arguments and no overflow for large ones.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = a - b
    half = 0.5 * np.abs(h)
    small = half < 1e-4
    # log(sinh(u)/u) with u = |h|/2; series for tiny u
    safe = np.where(small, 1.0, half)
    log_ratio = np.where(
        small,
        half**2 / 6.0,
        half + np.log1p(-np.exp(-2.0 * safe)) - np.log(2.0) - np.log(safe),
    )
    return 0.25 * np.exp(log_ratio - _log_cosh(0.5 * a) - _log_cosh(0.5 * b))


def kappa_min(arms=None, theta=None, *, unit_ball=False):
    """Smallest link derivative over an arm set, or over the unit ball."""
    theta = np.asarray(theta, dtype=float)
    if unit_ball:
        return float(link_mu_dot(np.linalg.norm(theta)))
    if arms is None:
        raise InvalidInstance("kappa_min needs an arm set or unit_ball=True")
    arms = np.atleast_2d(np.asarray(arms, dtype=float))
    if arms.shape[0] == 0 or arms.size == 0:
        raise InvalidInstance("empty arm set")
    return float(np.min(link_mu_dot(arms @ theta)))


def alpha_slope(x, theta1, theta2):
    """Secant slope of the link between ``x^T theta1`` and ``x^T theta2``.

    ``x`` may be a single arm or a stack of arms (one value per row).
    """
    x = np.asarray(x, dtype=float)
    a = x @ np.asarray(theta1, dtype=float)
    b = x @ np.asarray(theta2, dtype=float)
    out = np.where(np.abs(a - b) < ALPHA_EXACT_LIMIT, link_mu_dot(b), _secant(a, b))
    return out if np.ndim(out) else float(out)


def beta_weight(a, b):
    """``int_0^1 (1 - t) mu'(a + t (b - a)) dt``.

    Closed form for well separated arguments; Gauss-Legendre on the defining
    integral at moderate separation (the closed form cancels there); a
    two-term Taylor expansion when the arguments nearly coincide.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    h = b - a
    ah = np.abs(h)
    out = np.empty(a.shape)

    far = ah >= BETA_QUADRATURE_LIMIT
    if far.any():
        af, bf, hf = a[far], b[far], h[far]
        # log(1 + e^{-x}) = logaddexp(0, -x); 1/(e^a + 1) = mu(-a)
        out[far] = (np.logaddexp(0.0, -bf) - np.logaddexp(0.0, -af)) / hf**2 + link_mu(
            np.atleast_1d(-af)
        ) / hf

    mid = (ah >= BETA_SERIES_LIMIT) & ~far
    if mid.any():
        am, hm = a[mid], h[mid]
        pts = am[:, None] + _GL_T[None, :] * hm[:, None]
        out[mid] = np.sum(_GL_W * (1.0 - _GL_T) * link_mu_dot(pts), axis=1)

    near = ah < BETA_SERIES_LIMIT
    if near.any():
        an, hn = a[near], h[near]
        out[near] = link_mu_dot(an) / 2.0 + link_mu_ddot(an) * hn / 6.0

    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticDataset:
    """Binary observations stored as (arm, trials, successes) rows.

    A row with ``trials == 1`` is a single ``(x_s, y_s)`` pair; aggregated
    rows let large fixed designs be represented in O(#distinct arms).
    ``tags`` optionally records a provenance label per row.
    """

    arms: np.ndarray
    trials: np.ndarray
    successes: np.ndarray
    tags: tuple = field(default=())

    def __post_init__(self):
        arms = np.atleast_2d(np.asarray(self.arms, dtype=float))
        trials = np.asarray(self.trials, dtype=np.int64).reshape(-1)
        successes = np.asarray(self.successes, dtype=np.int64).reshape(-1)
        if arms.shape[0] != trials.shape[0] or trials.shape != successes.shape:
            raise InvalidInstance("arms, trials and successes must have matching lengths")
        if np.any(trials < 0) or np.any(successes < 0) or np.any(successes > trials):
            raise InvalidInstance("need 0 <= successes <= trials")
        if self.tags and len(self.tags) != arms.shape[0]:
            raise InvalidInstance("one tag per row required")
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "successes", successes)
        object.__setattr__(self, "tags", tuple(self.tags))

    @classmethod
    def from_samples(cls, arms, labels, tags=()):
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if np.any((labels != 0) & (labels != 1)):
            raise InvalidInstance("labels must be 0 or 1")
        return cls(arms, np.ones_like(labels), labels, tags)

    @classmethod
    def empty(cls, d):
        return cls(np.zeros((0, d)), np.zeros(0), np.zeros(0))

    @property
    def dim(self):
        return self.arms.shape[1]

    @property
    def n_samples(self):
        return int(self.trials.sum())

    @property
    def t_eff(self):
        rows = self.arms[self.trials > 0]
        if rows.shape[0] == 0:
            return 0
        return int(np.unique(rows, axis=0).shape[0])

    def __len__(self):
        return self.n_samples

    def concat(self, other):
        if self.arms.shape[0] and other.arms.shape[0] and self.dim != other.dim:
            raise InvalidInstance("dimension mismatch")
        tags = ()
        if self.tags or other.tags:
            tags = (self.tags or ("",) * self.arms.shape[0]) + (
                other.tags or ("",) * other.arms.shape[0]
            )
        return LogisticDataset(
            np.vstack([self.arms, other.arms]) if self.arms.size else other.arms,
            np.concatenate([self.trials, other.trials]),
            np.concatenate([self.successes, other.successes]),
            tags,
        )

    def repeat(self, k):
        return LogisticDataset(self.arms, self.trials * k, self.successes * k, self.tags)


def _check_dim(data, theta):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if data.arms.shape[0] and data.dim != theta.shape[0]:
        raise InvalidInstance(f"dimension mismatch: data d={data.dim}, theta d={theta.shape[0]}")
    return theta


def fisher_info(data, theta):
    """``sum_s mu'(x_s^T theta) x_s x_s^T`` over every sample in ``data``."""
    if data.n_samples == 0:
        raise InvalidInstance("empty dataset")
    theta = _check_dim(data, theta)
    w = data.trials * link_mu_dot(data.arms @ theta)
    return (data.arms * w[:, None]).T @ data.arms


def log_likelihood(data, theta, ridge=0.0):
    theta = np.asarray(theta, dtype=float)
    z = data.arms @ theta
    fails = data.trials - data.successes
    # log mu(z) = -log(1+e^{-z}); log(1-mu(z)) = -log(1+e^{z})
    ll = -np.sum(data.successes * np.logaddexp(0.0, -z) + fails * np.logaddexp(0.0, z))
    return float(ll - 0.5 * ridge * theta @ theta)


def _grad_hess(data, theta, ridge):
    z = data.arms @ theta
    # successes - trials * mu(z), arranged to stay accurate in both tails
    resid = data.successes * link_mu(-z) - (data.trials - data.successes) * link_mu(z)
    grad = data.arms.T @ resid - ridge * theta
    w = data.trials * link_mu_dot(z)
    hess = (data.arms * w[:, None]).T @ data.arms + ridge * np.eye(theta.size)
    return grad, hess


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MleEstimate:
    theta: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    separation_detected: bool
    norm_bound: float | None = None
    log_likelihood_trace: tuple = ()


def fit_mle(data, tol=1e-10, max_iters=100, separation_guard=50.0, ridge=0.0):
    """Damped-Newton maximizer of the (optionally ridge-penalized) log-likelihood.

    Starts at zero. Converged means the gradient of the *average*
    log-likelihood is below ``tol`` and the Newton step is below 1e-6, so
    ``tol`` means the same thing for ten samples and for ten million
    aggregated ones, and a separable problem (vanishing gradient, unit-size
    steps) never reports convergence. Newton directions use the Hessian
    pseudo-inverse, so directions the data do not identify stay at zero.
    """
    if data.n_samples == 0:
        raise InvalidInstance("cannot fit an empty dataset")
    n = data.n_samples
    theta = np.zeros(data.dim)
    ll = log_likelihood(data, theta, ridge)
    trace = [ll]
    separated = False
    converged = False
    it = 0
    while True:
        grad, hess = _grad_hess(data, theta, ridge)
        gnorm = float(np.max(np.abs(grad))) / n
        if not np.isfinite(gnorm):
            raise NonFiniteLikelihood("gradient overflowed")
        step = psd_pinv(hess) @ grad
        if gnorm <= tol and np.linalg.norm(step) <= 1e-6:
            converged = True
            break
        if np.linalg.norm(theta) > separation_guard:
            separated = True
            break
        if it >= max_iters:
            break
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            ll_c = log_likelihood(data, cand, ridge)
            if not np.isfinite(ll_c):
                raise NonFiniteLikelihood("log-likelihood overflowed")
            # equality up to rounding counts as progress; the step is tiny then
            if ll_c >= ll - 1e-13 * max(1.0, abs(ll)):
                break
            t *= 0.5
        else:
            break
        it += 1
        theta, ll = cand, ll_c
        trace.append(ll)

    return MleEstimate(
        theta=theta,
        converged=converged,
        iterations=it,
        final_gradient_norm=gnorm,
        separation_detected=separated,
        log_likelihood_trace=tuple(trace),
    )


def _link_sum(data, theta, eta):
    """g(theta) = sum_s mu(x_s^T theta) x_s + eta theta."""
    return data.arms.T @ (data.trials * link_mu(data.arms @ theta)) + eta * theta


def _projection_objective(data, theta, eta, g_ref):
    r = _link_sum(data, theta, eta) - g_ref
    _, H = _grad_hess_weights(data, theta, eta)
    u = np.linalg.solve(H, r)
    return float(r @ u), r, u


def _grad_hess_weights(data, theta, eta):
    w = data.trials * link_mu_dot(data.arms @ theta)
    H = (data.arms * w[:, None]).T @ data.arms + eta * np.eye(theta.size)
    return w, H


def _project_ball(theta, radius):
    nrm = np.linalg.norm(theta)
    return theta if nrm <= radius else theta * (radius / nrm)


def fit_projected_mle(data, eta, s_star, tol=1e-8, max_iters=2000):
    """Ridge MLE followed by projection onto ``||theta|| <= s_star``.

    The projection minimizes ``||g(theta) - g(theta_ridge)||^2`` in the
    ``H(eta, theta)^{-1}`` norm by projected gradient with Armijo
    backtracking. Its gradient is
    ``2 r - sum_s n_s mu''(x_s^T theta) (x_s^T u)^2 x_s`` with
    ``u = H^{-1} r``.
    """
    if eta <= 0 or s_star <= 0:
        raise InvalidInstance("eta and s_star must be positive")
    ridge_fit = fit_mle(data, ridge=eta, separation_guard=np.inf)
    theta = ridge_fit.theta
    if np.linalg.norm(theta) <= s_star:
        return MleEstimate(
            theta=theta,
            converged=ridge_fit.converged,
            iterations=ridge_fit.iterations,
            final_gradient_norm=ridge_fit.final_gradient_norm,
            separation_detected=False,
            norm_bound=float(s_star),
            log_likelihood_trace=ridge_fit.log_likelihood_trace,
        )

    g_ref = _link_sum(data, theta, eta)
    x = _project_ball(theta, s_star)
    f, r, u = _projection_objective(data, x, eta, g_ref)
    it = 0
    converged = False
    for it in range(1, max_iters + 1):
        z = data.arms @ x
        proj_u = data.arms @ u
        grad = 2.0 * r - data.arms.T @ (data.trials * link_mu_ddot(z) * proj_u**2)
        # step scaled by the local curvature so the first trial is sensible
        _, H = _grad_hess_weights(data, x, eta)
        step = 1.0 / (2.0 * np.linalg.eigvalsh(H)[-1])
        moved = False
        for _ in range(60):
            cand = _project_ball(x - step * grad, s_star)
            f_c, r_c, u_c = _projection_objective(data, cand, eta, g_ref)
            if f_c <= f - 1e-4 * grad @ (x - cand):
                moved = True
                break
            step *= 0.5
        if not moved:
            converged = True
            break
        delta = np.linalg.norm(cand - x)
        x, f, r, u = cand, f_c, r_c, u_c
        if delta <= tol * max(1.0, np.linalg.norm(x)):
            converged = True
            break
    if not converged:
        warnings.warn("projection step did not reach tolerance", RuntimeWarning)
    return MleEstimate(
        theta=x,
        converged=bool(converged and ridge_fit.converged),
        iterations=ridge_fit.iterations + it,
        final_gradient_norm=ridge_fit.final_gradient_norm,
        separation_detected=False,
        norm_bound=float(s_star),
        log_likelihood_trace=ridge_fit.log_likelihood_trace,
    )


def projection_objective(data, theta, eta, theta_ref):
    """``||g(theta) - g(theta_ref)||^2_{H(eta, theta)^{-1}}``, exposed for checks."""
    g_ref = _link_sum(data, np.asarray(theta_ref, dtype=float), eta)
    return _projection_objective(data, np.asarray(theta, dtype=float), eta, g_ref)[0]


def check_arm_norms(arms, allow_large=False):
    arms = np.atleast_2d(np.asarray(arms, dtype=float))
    if not allow_large and np.any(np.linalg.norm(arms, axis=1) > 1.0 + ARM_NORM_TOL):
        raise InvalidInstance("arm norm exceeds 1; pass allow_large=True to override")
    return arms
