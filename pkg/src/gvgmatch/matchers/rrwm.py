"""Reweighted random walks on the association graph."""

import numpy as np

from ..affinity import AffinityFactors
from .common import MatcherConfig, finalize, sinkhorn_normalize, uniform_start


def rrwm(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("RRWM")):
    """Random walk with reweighting jumps.

    The walk uses ``K / max row sum``. Each step the walked distribution is
    inflated (``exp(inflation * x / max x)``), projected by Sinkhorn, and
    mixed back in with weight ``rrwm_jump``.
    """
    n1, n2 = factors.shape
    dmax = factors.matvec(np.ones((n1, n2))).max()
    scale = 1.0 / dmax if dmax > 0 else 1.0
    x = uniform_start(factors.shape)
    x = x / x.sum()
    converged = False
    it = 0
    for it in range(1, cfg.rrwm_max_iters + 1):
        walk = scale * factors.matvec(x)
        total = walk.sum()
        if total <= 0:
            converged = True
            break
        walk /= total
        top = walk.max()
        y = np.exp(cfg.rrwm_inflation * (walk / top - 1.0))
        y = sinkhorn_normalize(y, iters=cfg.sinkhorn_iters, tol=cfg.rrwm_sinkhorn_tol)
        y /= y.sum()
        new = (1.0 - cfg.rrwm_jump) * walk + cfg.rrwm_jump * y
        new /= new.sum()
        delta = float(np.sum((new - x) ** 2))
        x = new
        if delta <= cfg.tol ** 2:
            converged = True
            break
    return finalize(factors, x, "RRWM", converged, it)
