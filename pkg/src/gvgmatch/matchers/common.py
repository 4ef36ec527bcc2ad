"""Assignment container, solver configuration and discretisation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..affinity import AffinityFactors

ALGORITHMS = ("GA", "SM", "SMAC", "PM", "IPFP_U", "IPFP_SM", "RRWM", "FGM")
REQUIRED_ALGORITHMS = ("GA", "SM", "IPFP_U", "IPFP_SM", "RRWM", "FGM")


class MatcherError(RuntimeError):
    """A solver could not produce any usable assignment."""


@dataclass(frozen=True)
class MatcherConfig:
    algorithm: str = "FGM"
    max_iters: int = 1000
    tol: float = 1e-10
    seed: int = 0
    # graduated assignment
    ga_beta0: float = 0.5
    ga_rate: float = 1.075
    ga_beta_max: float = 200.0
    ga_inner_iters: int = 4
    ga_sinkhorn_iters: int = 30
    ga_normalize: bool = True
    # reweighted random walk
    rrwm_inflation: float = 30.0
    rrwm_jump: float = 0.8
    rrwm_max_iters: int = 300
    rrwm_sinkhorn_tol: float = 1e-6
    # path following
    fgm_path_step: float = 0.1
    fgm_fw_iters: int = 50
    fgm_tol: float = 1e-6
    fgm_gamma: tuple = None  # fixes the homotopy parameter(s) when given
    # probabilistic matching
    pm_refine_iters: int = 0
    sinkhorn_iters: int = 1000

    def __post_init__(self):
        algo = str(self.algorithm).upper().replace("-", "_")
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        object.__setattr__(self, "algorithm", algo)
        for name in ("max_iters", "ga_inner_iters", "ga_sinkhorn_iters", "rrwm_max_iters", "fgm_fw_iters",
                     "sinkhorn_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("tol", "fgm_tol", "rrwm_sinkhorn_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.rrwm_jump <= 1.0:
            raise ValueError("rrwm_jump must lie in [0, 1]")
        if not 0.0 < self.fgm_path_step <= 1.0:
            raise ValueError("fgm_path_step must lie in (0, 1]")
        if self.ga_beta0 <= 0 or self.ga_beta_max < self.ga_beta0 or self.ga_rate < 1.0:
            raise ValueError("GA schedule needs 0 < beta0 <= beta_max and rate >= 1")

    def with_algorithm(self, algorithm) -> "MatcherConfig":
        return replace(self, algorithm=algorithm)


@dataclass
class Assignment:
    """Soft matrix plus its discretisation.

    ``permutation[i]`` is the node of B matched to node ``i`` of A, or -1.
    ``objective`` is J at the binary matrix induced by ``permutation``.
    """

    soft: np.ndarray
    permutation: np.ndarray
    objective: float
    algorithm: str = ""
    converged: bool = True
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.soft.shape

    def binary(self) -> np.ndarray:
        return permutation_matrix(self.permutation, self.soft.shape[1])

    def pairs(self):
        return [(int(i), int(j)) for i, j in enumerate(self.permutation) if j >= 0]

    def unassigned(self):
        return [int(i) for i, j in enumerate(self.permutation) if j < 0]


def permutation_matrix(permutation, n_cols) -> np.ndarray:
    perm = np.asarray(permutation, dtype=np.int64)
    X = np.zeros((len(perm), int(n_cols)))
    rows = np.flatnonzero(perm >= 0)
    X[rows, perm[rows]] = 1.0
    return X


def hungarian(scores) -> np.ndarray:
    """Maximum-score partial assignment; ``min(n1, n2)`` rows get a column."""
    S = np.asarray(scores, dtype=float)
    if S.ndim != 2:
        raise ValueError("scores must be a matrix")
    if not np.all(np.isfinite(S)):
        raise ValueError("scores must be finite")
    perm = np.full(S.shape[0], -1, dtype=np.int64)
    if S.size == 0:
        return perm
    rows, cols = linear_sum_assignment(S, maximize=True)
    perm[rows] = cols
    return perm


def assignment_score(scores, permutation) -> float:
    S = np.asarray(scores, dtype=float)
    perm = np.asarray(permutation)
    rows = np.flatnonzero(perm >= 0)
    return float(S[rows, perm[rows]].sum())


def sinkhorn_normalize(M, iters: int = 1000, tol: float = 1e-9, eps: float = 1e-12) -> np.ndarray:
    """Alternate row and column scaling of a non-negative matrix.

    Square inputs converge to doubly stochastic. For rectangular inputs the
    smaller side gets unit sums and the larger side sums to ``min / max``.
    Rows or columns that are entirely zero are lifted by ``eps`` first.
    """
    X = np.array(M, dtype=float)
    if X.ndim != 2 or X.size == 0:
        return X
    if np.any(X < 0) or not np.all(np.isfinite(X)):
        raise ValueError("sinkhorn needs a finite non-negative matrix")
    if np.any(X.sum(axis=1) <= 0) or np.any(X.sum(axis=0) <= 0):
        X = X + eps
    n1, n2 = X.shape
    row_target = 1.0 if n1 <= n2 else n2 / n1
    col_target = 1.0 if n2 <= n1 else n1 / n2
    for _ in range(int(iters)):
        X *= (row_target / X.sum(axis=1))[:, None]
        X *= (col_target / X.sum(axis=0))[None, :]
        if np.max(np.abs(X.sum(axis=1) - row_target)) <= tol:
            break
    return X


def uniform_start(shape) -> np.ndarray:
    n1, n2 = shape
    return np.full((n1, n2), 1.0 / max(n1, n2, 1))


def finalize(factors: AffinityFactors, soft, algorithm, converged=True, iterations=0, info=None,
             permutation=None) -> Assignment:
    """Discretise ``soft`` (unless a permutation is supplied) and score it."""
    soft = np.where(np.isfinite(soft), soft, 0.0)
    soft = np.maximum(np.asarray(soft, dtype=float), 0.0)
    perm = hungarian(soft) if permutation is None else np.asarray(permutation, dtype=np.int64)
    J = factors.objective(permutation_matrix(perm, factors.shape[1]))
    return Assignment(soft, perm, J, algorithm, bool(converged), int(iterations), dict(info or {}))
