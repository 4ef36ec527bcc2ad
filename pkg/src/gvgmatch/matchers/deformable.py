"""Alternate correspondence search and transform fitting."""

from __future__ import annotations

import numpy as np

from ..affinity import PATH_SAMPLES, AffinityWeights, build_affinity
from ..graph import SpatialGraph
from ..rigid import DegenerateConfigurationError
from .common import MatcherConfig, finalize
from .transforms import estimate_transform, warp_graph

DEFAULT_SCHEDULE = ("similarity", "affine", "nonrigid_tps")


def deformable_match(A: SpatialGraph, B: SpatialGraph, base_algorithm: str = "FGM",
                     schedule=DEFAULT_SCHEDULE, cfg: MatcherConfig = None,
                     weights: AffinityWeights = AffinityWeights(), stats=None, tol: float = 1e-6,
                     tps_regularization: float = 1.0, potential=None, n_samples: int = PATH_SAMPLES):
    """Match A to B, then repeatedly warp A toward its matches and rematch.

    Stage ``k`` fits ``schedule[k]`` to the current matched node pairs, warps
    A, rebuilds affinities (normalisation statistics fixed from stage 0) and
    reruns the matcher; among every permutation found so far the best under
    the new affinity is kept. A stage is accepted only if it raises J by more
    than ``tol`` (relative); otherwise the previous state is returned.

    Returns ``(assignment, transforms, info)``; ``info["warped"]`` is the final
    geometry of A.
    """
    from . import run_matcher

    cfg = (cfg or MatcherConfig()).with_algorithm(base_algorithm)
    factors, _, stats = build_affinity(A, B, weights, stats, n_samples)
    assignment = run_matcher(factors, cfg)
    seen = [assignment.permutation]
    transforms = []
    history = [assignment.objective]
    current = A
    for kind in schedule:
        pairs = assignment.pairs()
        if not pairs:
            break
        rows = np.array([i for i, _ in pairs])
        cols = np.array([j for _, j in pairs])
        try:
            T = estimate_transform(current.coords[rows], B.coords[cols], kind, tps_regularization)
        except DegenerateConfigurationError:
            break
        warped = warp_graph(current, T, potential)
        new_factors, _, _ = build_affinity(warped, B, weights, stats, n_samples)
        cand = run_matcher(new_factors, cfg)
        best = cand
        for perm in seen:
            old = finalize(new_factors, cand.soft, cand.algorithm, cand.converged, cand.iterations,
                           cand.info, permutation=perm)
            if old.objective > best.objective:
                best = old
        if best.objective <= assignment.objective + tol * max(1.0, abs(assignment.objective)):
            break
        seen.append(best.permutation)
        assignment, current = best, warped
        transforms.append(T)
        history.append(best.objective)
    assignment.info = dict(assignment.info, stage_objectives=history)
    return assignment, transforms, {"warped": current, "stats": stats}
