"""Pseudo-inverse helpers for PSD matrices.

Every inverse of a Fisher or Gram matrix in the package goes through here so
the rank cutoff is applied uniformly.
"""

import numpy as np

PINV_RCOND = 1e-10
SPAN_TOL = 1e-8


def psd_eig(M, rcond=PINV_RCOND):
    """Eigenpairs of the symmetric part of ``M`` restricted to its range."""
    M = np.asarray(M, dtype=float)
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    top = w[-1] if w.size else 0.0
    if top <= 0:
        return w[:0], U[:, :0]
    keep = w > rcond * top
    return w[keep], U[:, keep]


def psd_pinv(M, rcond=PINV_RCOND):
    w, U = psd_eig(M, rcond)
    return (U / w) @ U.T


def quad_forms(M, V, rcond=PINV_RCOND, span_tol=SPAN_TOL):
    """Return ``v^T M^+ v`` for each row ``v`` of ``V``.

    Rows with a component outside the range of ``M`` (relative size above
    ``span_tol``) get ``+inf``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    w, U = psd_eig(M, rcond)
    coef = V @ U
    vals = np.sum(coef**2 / w, axis=1)
    outside = outside_range(V, U, coef, span_tol)
    vals[outside] = np.inf
    return vals


def outside_range(V, U, coef=None, span_tol=SPAN_TOL):
    """Rows of ``V`` with a relative component above ``span_tol`` off ``span(U)``."""
    if U.shape[1] == U.shape[0]:
        return np.zeros(V.shape[0], dtype=bool)
    if coef is None:
        coef = V @ U
    resid = np.sum((V - coef @ U.T) ** 2, axis=1)
    norms = np.sum(V**2, axis=1)
    return (resid > (span_tol**2) * norms) & (norms > 0)


def quad_forms_projected(M, V, rcond=PINV_RCOND):
    """Like :func:`quad_forms` but silently drops null-space components."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    w, U = psd_eig(M, rcond)
    coef = V @ U
    return np.sum(coef**2 / w, axis=1)


def in_span(M, v, rcond=PINV_RCOND, span_tol=SPAN_TOL):
    return bool(np.isfinite(quad_forms(M, v, rcond, span_tol)[0]))


def min_eig(M):
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
