"""Graduated assignment and probabilistic matching, both built on Sinkhorn."""

import numpy as np

from ..affinity import AffinityFactors
from .common import MatcherConfig, finalize, sinkhorn_normalize, uniform_start


def softassign_step(factors: AffinityFactors, X, beta, sinkhorn_iters=30, normalize=True):
    """One softassign update: gradient, exponentiate at inverse temperature ``beta``, Sinkhorn."""
    Q = 2.0 * factors.matvec(X)
    top = Q.max()
    if normalize and top > 0:
        Q = Q / top
    return sinkhorn_normalize(np.exp(beta * (Q - Q.max())), iters=sinkhorn_iters, tol=0.0)


def graduated_assignment(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("GA")):
    """Deterministic annealing on the doubly stochastic polytope.

    The gradient is divided by its maximum so the temperature schedule means
    the same thing for every graph size (``ga_normalize``).
    """
    X = uniform_start(factors.shape)
    beta = cfg.ga_beta0
    it = 0
    converged = False
    while True:
        for _ in range(cfg.ga_inner_iters):
            new = softassign_step(factors, X, beta, cfg.ga_sinkhorn_iters, cfg.ga_normalize)
            it += 1
            delta = np.abs(new - X).max()
            X = new
            if delta <= cfg.tol:
                break
        if beta >= cfg.ga_beta_max:
            converged = True
            break
        beta = min(beta * cfg.ga_rate, cfg.ga_beta_max)
        if cfg.ga_rate == 1.0:
            converged = True
            break
    return finalize(factors, X, "GA", converged, it, info={"final_beta": beta})


def probabilistic_match(factors: AffinityFactors, cfg: MatcherConfig = MatcherConfig("PM")):
    """Marginalise K to a per-pair score, then take the closest doubly
    stochastic matrix in relative entropy (Sinkhorn scaling).

    ``pm_refine_iters`` > 0 adds multiplicative refinements
    ``X <- sinkhorn(X * (K vec X))``.
    """
    n1, n2 = factors.shape
    X = factors.matvec(np.ones((n1, n2)))
    X = sinkhorn_normalize(X, iters=cfg.sinkhorn_iters, tol=cfg.tol)
    for _ in range(cfg.pm_refine_iters):
        X = sinkhorn_normalize(X * factors.matvec(X), iters=cfg.sinkhorn_iters, tol=cfg.tol)
    if not np.all(np.isfinite(X)):
        X = uniform_start(factors.shape)
    return finalize(factors, X, "PM", True, 1 + cfg.pm_refine_iters)

