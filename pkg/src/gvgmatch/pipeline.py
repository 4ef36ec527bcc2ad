"""Two-step registration: rigid pre-alignment, then graph matching."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .affinity import PATH_SAMPLES, AffinityWeights, build_affinity
from .graph import SpatialGraph
from .matchers import (DEFAULT_SCHEDULE, Assignment, MatcherConfig, MatcherError, deformable_match,
                       run_matcher)
from .rigid import (AlignmentReport, RigidConfig, apply_transform, centroid_alignment, collect_point_cloud,
                    rigid_candidates)


@dataclass(frozen=True)
class RegistrationConfig:
    weights: AffinityWeights = AffinityWeights()
    rigid: RigidConfig = RigidConfig(refine_top=16)
    skip_rigid: bool = False
    # distinct rigid poses handed to the pose judge; 1 keeps the lowest trimmed RMSE
    pose_candidates: int = 16
    # also judge the unrotated centroid-aligned pose (ICP drifts under strong deformation)
    centroid_candidate: bool = True
    pose_judge: str = "IPFP_SM"
    judge_samples: int = 12
    matcher: MatcherConfig = MatcherConfig()
    deformable: tuple = ()  # algorithms run through deformable_match
    schedule: tuple = DEFAULT_SCHEDULE
    tps_regularization: float = 1.0
    n_samples: int = PATH_SAMPLES


@dataclass
class AlgorithmResult:
    algorithm: str
    assignment: Assignment = None
    transforms: list = field(default_factory=list)
    runtime_ms: float = 0.0
    error: str = ""

    @property
    def ok(self):
        return self.assignment is not None


@dataclass
class RegistrationResult:
    alignment: AlignmentReport
    aligned: SpatialGraph
    results: dict
    pose_scores: list
    stats: object


def choose_pose(A: SpatialGraph, B: SpatialGraph, config: RegistrationConfig):
    """Rigid candidates, judged by the objective a quick matcher reaches from each."""
    if config.skip_rigid:
        return None, A, None, []
    cloud_a, cloud_b = collect_point_cloud(A), collect_point_cloud(B)
    cands = rigid_candidates(cloud_a, cloud_b, config.rigid, max_candidates=max(1, config.pose_candidates))
    if config.pose_candidates > 1 and config.centroid_candidate:
        cands.append(centroid_alignment(cloud_a, cloud_b, config.rigid))
    if len(cands) == 1:
        return cands[0], apply_transform(A, cands[0].transform), None, []
    judge = config.matcher.with_algorithm(config.pose_judge)
    n_samples = min(config.judge_samples, config.n_samples)
    stats = None
    scores = []
    for c in cands:
        moved = apply_transform(A, c.transform)
        factors, _, s = build_affinity(moved, B, config.weights, stats, n_samples)
        stats = stats or s  # one normalisation for every pose so scores compare
        scores.append(run_matcher(factors, judge).objective)
    k = max(range(len(cands)), key=lambda i: (scores[i], -i))
    return cands[k], apply_transform(A, cands[k].transform), None, scores


def register(A: SpatialGraph, B: SpatialGraph, algorithms=("FGM",),
             config: RegistrationConfig = RegistrationConfig(), timing: bool = True) -> RegistrationResult:
    alignment, aligned, stats, scores = choose_pose(A, B, config)
    factors, _, stats = build_affinity(aligned, B, config.weights, stats, config.n_samples)
    results = {}
    for name in algorithms:
        cfg = config.matcher.with_algorithm(name)
        t0 = time.perf_counter()
        res = AlgorithmResult(cfg.algorithm)
        try:
            if cfg.algorithm in config.deformable:
                res.assignment, res.transforms, _ = deformable_match(
                    aligned, B, cfg.algorithm, config.schedule, cfg, config.weights, stats,
                    tps_regularization=config.tps_regularization, n_samples=config.n_samples)
                # report J on the rigidly aligned pair so every algorithm is scored alike
                asg = res.assignment
                asg.info["warped_objective"] = asg.objective
                asg.objective = factors.objective(asg.binary())
            else:
                res.assignment = run_matcher(factors, cfg)
        except MatcherError as exc:
            res.error = str(exc)
        res.runtime_ms = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
        results[cfg.algorithm] = res
    return RegistrationResult(alignment, aligned, results, scores, stats)
