"""Integer projected fixed point iteration."""

import numpy as np

from ..affinity import AffinityFactors
from .common import MatcherConfig, finalize, hungarian, permutation_matrix, uniform_start
from .spectral import principal_eigenvector


def ipfp(factors: AffinityFactors, init=None, cfg: MatcherConfig = MatcherConfig("IPFP_U"), name="IPFP"):
    """Climb J from ``init`` through linear-assignment directions.

    Each round linearises J at ``x``, takes the best discrete point ``b`` of
    that linearisation, and moves along ``b - x`` with an exact line search.
    The best discrete point seen is returned; its objective trace is kept in
    ``info["trace"]`` and never decreases.
    """
    n1, n2 = factors.shape
    x = uniform_start(factors.shape) if init is None else np.array(init, dtype=float)
    if x.shape != (n1, n2):
        raise ValueError(f"init shape {x.shape} != {(n1, n2)}")
    if np.any(x < 0):
        raise ValueError("init must be non-negative")

    best_perm = hungarian(x)
    best_J = factors.objective(permutation_matrix(best_perm, n2))
    trace = [best_J]
    Kx = factors.matvec(x)
    prev = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        perm = hungarian(2.0 * Kx)
        b = permutation_matrix(perm, n2)
        Kb = factors.matvec(b)
        J_b = float(np.sum(b * Kb))
        if J_b > best_J:
            best_J, best_perm = J_b, perm
        trace.append(best_J)
        if prev is not None and np.array_equal(perm, prev):
            converged = True
            break
        prev = perm
        d = b - x
        Kd = Kb - Kx
        C = 2.0 * float(np.sum(d * Kx))
        D = float(np.sum(d * Kd))
        t = 1.0 if D >= 0 else min(1.0, max(0.0, -C / (2.0 * D)))
        if t <= 0.0 and np.abs(d).max() > 0:
            converged = True
            break
        x = x + t * d
        Kx = Kx + t * Kd
    return finalize(factors, x, name, converged, it, info={"trace": trace}, permutation=best_perm)


def ipfp_uniform(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("IPFP_U")):
    return ipfp(factors, None, cfg, "IPFP_U")


def ipfp_spectral(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("IPFP_SM")):
    x, _, _ = principal_eigenvector(factors, cfg.max_iters, cfg.tol)
    x = np.maximum(x, 0.0)
    n1, n2 = factors.shape
    total = x.sum()
    # rescale so the start has the mass of a full assignment
    x = x * (min(n1, n2) / total) if total > 0 else uniform_start(factors.shape)
    return ipfp(factors, x, cfg, "IPFP_SM")
