"""Spectral relaxations: plain principal eigenvector (SM) and its affinely
constrained variant (SMAC)."""

import numpy as np

from ..affinity import AffinityFactors
from .common import MatcherConfig, finalize, uniform_start


def _power_iteration(apply, x0, max_iters, tol):
    x = x0 / np.linalg.norm(x0)
    for it in range(1, max_iters + 1):
        y = apply(x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return x, True, it
        y /= norm
        if y.sum() < 0:
            y = -y
        if np.linalg.norm(y - x) <= tol:
            return y, True, it
        x = y
    return x, False, max_iters


def principal_eigenvector(factors: AffinityFactors, max_iters=1000, tol=1e-10):
    """Leading eigenvector of K, shaped like X. K is entrywise non-negative,
    so starting from a positive vector keeps every iterate non-negative."""
    return _power_iteration(factors.matvec, uniform_start(factors.shape), max_iters, tol)


def spectral_match(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("SM")):
    x, converged, it = principal_eigenvector(factors, cfg.max_iters, cfg.tol)
    return finalize(factors, np.maximum(x, 0.0), "SM", converged, it)


def _center(X):
    """Orthogonal projector onto matrices with equal row sums and equal column sums."""
    Y = X - X.mean(axis=1, keepdims=True)
    Y = Y - Y.mean(axis=0, keepdims=True)
    return Y + X.mean()


def smac(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("SMAC")):
    """Leading eigenvector of ``P K P`` with ``P`` the projector above.

    The one-to-one constraints (unit row sums, equal column sums) are
    affine; in homogeneous form they reduce to the subspace ``P`` projects
    onto. The eigenvector is scaled so its row sums (or column sums, for the
    smaller side) equal one; the raw scaled matrix is kept in ``info`` and the
    soft matrix is its non-negative part.
    """
    n1, n2 = factors.shape

    def apply(X):
        return _center(factors.matvec(_center(X)))

    x, converged, it = _power_iteration(apply, uniform_start(factors.shape), cfg.max_iters, cfg.tol)
    x = _center(x)
    total = x.sum()
    if abs(total) > 1e-300:
        x = x * (min(n1, n2) / total)
    return finalize(factors, np.maximum(x, 0.0), "SMAC", converged, it, info={"raw": x})
