"""Quadratic-assignment solvers over factorised affinities."""

from .common import (ALGORITHMS, REQUIRED_ALGORITHMS, Assignment, MatcherConfig, MatcherError,
                     assignment_score, finalize, hungarian, permutation_matrix, sinkhorn_normalize)
from .deformable import DEFAULT_SCHEDULE, deformable_match
from .fgm import fgm
from .ipfp import ipfp, ipfp_spectral, ipfp_uniform
from .rrwm import rrwm
from .softassign import graduated_assignment, probabilistic_match, softassign_step
from .spectral import principal_eigenvector, smac, spectral_match
from .transforms import TRANSFORM_KINDS, TransformEstimate, estimate_transform, warp_graph

SOLVERS = {
    "GA": graduated_assignment,
    "SM": spectral_match,
    "SMAC": smac,
    "PM": probabilistic_match,
    "IPFP_U": ipfp_uniform,
    "IPFP_SM": ipfp_spectral,
    "RRWM": rrwm,
    "FGM": fgm,
}


def run_matcher(factors, cfg: MatcherConfig = MatcherConfig()) -> Assignment:
    """Dispatch on ``cfg.algorithm``; any numerical failure becomes :class:`MatcherError`."""
    try:
        return SOLVERS[cfg.algorithm](factors, cfg)
    except (FloatingPointError, ValueError, ZeroDivisionError, IndexError) as exc:
        raise MatcherError(f"{cfg.algorithm} failed: {exc}") from exc


__all__ = [
    "ALGORITHMS", "REQUIRED_ALGORITHMS", "Assignment", "MatcherConfig", "MatcherError", "SOLVERS",
    "DEFAULT_SCHEDULE", "TRANSFORM_KINDS", "TransformEstimate", "assignment_score", "deformable_match",
    "estimate_transform", "fgm", "finalize", "graduated_assignment", "hungarian", "ipfp", "ipfp_spectral",
    "ipfp_uniform", "permutation_matrix", "principal_eigenvector", "probabilistic_match", "rrwm",
    "run_matcher", "sinkhorn_normalize", "smac", "softassign_step", "spectral_match", "warp_graph",
]
