"""Node and edge affinities between two spatial graphs.

Five cross-graph distance matrices feed two Gaussian-style kernels:

    Kn = exp(-(a1 * C / sC + a2 * D / sD))
    Ke = exp(-(b1 * P / sP + b2 * L / sL + b3 * U / sU))

C: node coordinate distance, D: geodesic degree difference, P: average
symmetric path distance, L: edge length difference, U: edge energy difference.
The full (n1*n2) x (n1*n2) affinity matrix is never formed except on request;
products with it go through :meth:`AffinityFactors.matvec`.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .graph import SpatialGraph, polyline_resample

SIGMA_FLOOR = 1e-8
# exp(-700) ~ 1e-304: a floored sigma must not underflow an entry to exactly 0
EXPONENT_CAP = 700.0
DENSE_CAP = 4096
PATH_SAMPLES = 50


class CapacityError(RuntimeError):
    """A dense affinity matrix was requested for a problem above the size cap."""


@dataclass(frozen=True)
class AffinityWeights:
    alpha: tuple = (0.5, 0.5)
    beta: tuple = (0.25, 0.25, 0.5)

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        beta = tuple(float(b) for b in self.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if len(alpha) != 2 or len(beta) != 3:
            raise ValueError("alpha needs 2 weights and beta needs 3")
        for name, w in (("alpha", alpha), ("beta", beta)):
            if any(x < 0 for x in w):
                raise ValueError(f"{name} weights must be non-negative")
            if abs(sum(w) - 1.0) > 1e-12:
                raise ValueError(f"{name} weights must sum to 1 (got {sum(w)!r})")


@dataclass(frozen=True)
class DistanceMatrices:
    C: np.ndarray
    D: np.ndarray
    P: np.ndarray
    L: np.ndarray
    U: np.ndarray

    def transpose(self) -> "DistanceMatrices":
        return DistanceMatrices(self.C.T, self.D.T, self.P.T, self.L.T, self.U.T)


@dataclass(frozen=True)
class NormalizationStats:
    sigma_C: float
    sigma_D: float
    sigma_P: float
    sigma_L: float
    sigma_U: float

    def as_dict(self):
        return {k: getattr(self, k) for k in ("sigma_C", "sigma_D", "sigma_P", "sigma_L", "sigma_U")}


# ---------------------------------------------------------------------------
# Path geometry
# ---------------------------------------------------------------------------

def _merge_collinear(points, rtol=1e-9):
    """Drop interior vertices whose neighbouring segments continue in a straight line.

    The union of the segments is unchanged, so point-to-polyline distances are too.
    """
    u = points[1:-1] - points[:-2]
    v = points[2:] - points[1:-1]
    cross = np.linalg.norm(np.cross(u, v), axis=1)
    scale = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
    straight = (cross <= rtol * scale) & (np.einsum("ij,ij->i", u, v) > 0)
    keep = np.concatenate([[True], ~straight, [True]])
    return points[keep]


class PathSamples:
    """Resampled query points plus (collinear-merged) segment soup for one graph."""

    def __init__(self, paths, n_samples=PATH_SAMPLES):
        self.n_samples = n_samples
        m = len(paths)
        self.points = np.empty((m, n_samples, 3))
        starts, ends, ptr = [], [], [0]
        for e, p in enumerate(paths):
            q = polyline_resample(p, n_samples)
            self.points[e] = q
            r = _merge_collinear(q)
            starts.append(r[:-1])
            ends.append(r[1:])
            ptr.append(ptr[-1] + len(r) - 1)
        self.seg_start = np.vstack(starts) if starts else np.zeros((0, 3))
        self.seg_end = np.vstack(ends) if ends else np.zeros((0, 3))
        self.seg_ptr = np.asarray(ptr, dtype=np.int64)

    @classmethod
    def of(cls, graph: SpatialGraph, n_samples=PATH_SAMPLES):
        """Samples of ``graph``'s paths, memoised per graph object (graphs are immutable)."""
        per_graph = _SAMPLES_CACHE.setdefault(graph, {})
        if n_samples not in per_graph:
            per_graph[n_samples] = cls(graph.paths, n_samples)
        return per_graph[n_samples]


_SAMPLES_CACHE = weakref.WeakKeyDictionary()


def path_distance_matrix(sa: PathSamples, sb: PathSamples) -> np.ndarray:
    if len(sa.points) == 0 or len(sb.points) == 0:
        return np.zeros((len(sa.points), len(sb.points)))
    ab = kernels.mean_min_segment_distance(sa.points, sb.seg_start, sb.seg_end, sb.seg_ptr)
    ba = kernels.mean_min_segment_distance(sb.points, sa.seg_start, sa.seg_end, sa.seg_ptr)
    P = 0.5 * (ab + ba.T)
    # projection round-off leaves ~1e-16 on coincident paths; those are exactly 0
    scale = max(float(np.abs(sa.points).max()), float(np.abs(sb.points).max()), 1.0)
    P[P <= 64.0 * np.finfo(float).eps * scale] = 0.0
    return P


def average_symmetric_distance(path_a, path_b, n_samples: int = PATH_SAMPLES) -> float:
    """Symmetrised mean point-to-curve distance between two polylines.

    Both curves are resampled to ``n_samples`` points; each sample's distance
    is taken to the other curve's segments, not just its vertices. The result
    does not depend on the direction either path is traversed in.
    """
    for p in (path_a, path_b):
        p = np.asarray(p, dtype=float)
        if len(p) < 2 or np.linalg.norm(np.diff(p, axis=0), axis=1).sum() == 0.0:
            raise ValueError("degenerate polyline: need >= 2 points and non-zero length")
    sa = PathSamples([path_a], n_samples)
    sb = PathSamples([path_b], n_samples)
    return float(path_distance_matrix(sa, sb)[0, 0])


# ---------------------------------------------------------------------------
# Distances, normalisation, kernels
# ---------------------------------------------------------------------------

def distance_matrices(A: SpatialGraph, B: SpatialGraph, n_samples: int = PATH_SAMPLES,
                      samples=None) -> DistanceMatrices:
    if A.n_nodes == 0 or B.n_nodes == 0:
        raise ValueError("both graphs must have at least one node")
    C = np.linalg.norm(A.coords[:, None, :] - B.coords[None, :, :], axis=2)
    D = np.abs(A.degrees[:, None] - B.degrees[None, :])
    L = np.abs(A.lengths[:, None] - B.lengths[None, :])
    U = np.abs(A.energies[:, None] - B.energies[None, :])
    sa, sb = samples if samples is not None else (PathSamples.of(A, n_samples), PathSamples.of(B, n_samples))
    P = path_distance_matrix(sa, sb)
    return DistanceMatrices(C, D, P, L, U)


def _off_diagonal(M):
    M = np.asarray(M)
    mask = ~np.eye(M.shape[0], M.shape[1], dtype=bool)
    return M[mask]


def normalization_stats(population: Sequence[DistanceMatrices], floor: float = SIGMA_FLOOR) -> NormalizationStats:
    """Population std of the pooled off-diagonal entries of each matrix kind."""
    if len(population) == 0:
        raise ValueError("population must be non-empty")
    sig = {}
    for kind in "CDPLU":
        pooled = np.concatenate([_off_diagonal(getattr(dm, kind)) for dm in population])
        s = float(np.std(pooled)) if pooled.size else 0.0
        sig["sigma_" + kind] = max(s, floor)
    return NormalizationStats(**sig)


def node_affinity(dm: DistanceMatrices, w: AffinityWeights, s: NormalizationStats) -> np.ndarray:
    a1, a2 = w.alpha
    return np.exp(-np.minimum(a1 * dm.C / s.sigma_C + a2 * dm.D / s.sigma_D, EXPONENT_CAP))


def edge_affinity(dm: DistanceMatrices, w: AffinityWeights, s: NormalizationStats) -> np.ndarray:
    b1, b2, b3 = w.beta
    return np.exp(-np.minimum(b1 * dm.P / s.sigma_P + b2 * dm.L / s.sigma_L + b3 * dm.U / s.sigma_U, EXPONENT_CAP))


# ---------------------------------------------------------------------------
# Factorised affinity
# ---------------------------------------------------------------------------

@dataclass
class AffinityFactors:
    """Node affinity ``Kn`` (n1 x n2), edge affinity ``Ke`` (m1 x m2) and edge endpoints.

    The implied dense matrix indexes ``vec(X)`` row-major, ``(i, j) -> i * n2 + j``.
    Its diagonal is ``Kn``; entry ``[(a, c), (b, d)]`` holds ``Ke[v, w]`` when
    ``v = {a, b}`` and ``w = {c, d}`` are edges, for both endpoint pairings.
    """

    Kn: np.ndarray
    Ke: np.ndarray
    edges_a: np.ndarray
    edges_b: np.ndarray

    def __post_init__(self):
        self.Kn = np.ascontiguousarray(self.Kn, dtype=float)
        self.Ke = np.ascontiguousarray(self.Ke, dtype=float).reshape(len(self.edges_a), len(self.edges_b))
        self.edges_a = np.ascontiguousarray(self.edges_a, dtype=np.int64).reshape(-1, 2)
        self.edges_b = np.ascontiguousarray(self.edges_b, dtype=np.int64).reshape(-1, 2)
        self._degree_sum = None

    @property
    def shape(self):
        return self.Kn.shape

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != self.Kn.shape:
            raise ValueError(f"assignment shape {X.shape} does not match affinity shape {self.Kn.shape}")
        return np.ascontiguousarray(X)

    def edge_matvec(self, X):
        X = self._check(X)
        if len(self.edges_a) == 0 or len(self.edges_b) == 0:
            return np.zeros_like(X)
        return kernels.edge_matvec(self.Ke, self.edges_a, self.edges_b, X)

    def matvec(self, X):
        """``K @ vec(X)`` reshaped to the shape of ``X``."""
        X = self._check(X)
        return self.Kn * X + self.edge_matvec(X)

    def objective(self, X) -> float:
        X = self._check(X)
        return float(np.sum(self.Kn * X * X) + np.sum(X * self.edge_matvec(X)))

    def edge_degree(self):
        """``D[i, j] = sum of Ke[v, w]`` over edges ``v`` at ``i`` and ``w`` at ``j``."""
        if self._degree_sum is None:
            n1, n2 = self.Kn.shape
            ga = np.zeros((n1, len(self.edges_a)))
            gb = np.zeros((n2, len(self.edges_b)))
            idx = np.arange(len(self.edges_a))
            ga[self.edges_a[:, 0], idx] = 1.0
            ga[self.edges_a[:, 1], idx] = 1.0
            idx = np.arange(len(self.edges_b))
            gb[self.edges_b[:, 0], idx] = 1.0
            gb[self.edges_b[:, 1], idx] = 1.0
            self._incidence = (ga, gb)
            self._degree_sum = ga @ self.Ke @ gb.T
        return self._degree_sum

    def incidence(self):
        self.edge_degree()
        return self._incidence

    def transpose(self) -> "AffinityFactors":
        return AffinityFactors(self.Kn.T, self.Ke.T, self.edges_b, self.edges_a)

    def dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        n1, n2 = self.Kn.shape
        size = n1 * n2
        if size > cap:
            raise CapacityError(f"dense affinity needs {size} > {cap} rows; use the factorised products")
        K = np.diag(self.Kn.ravel())
        for v, (a, b) in enumerate(self.edges_a):
            for w, (c, d) in enumerate(self.edges_b):
                k = self.Ke[v, w]
                for (i1, j1), (i2, j2) in (((a, c), (b, d)), ((a, d), (b, c))):
                    K[i1 * n2 + j1, i2 * n2 + j2] = k
                    K[i2 * n2 + j2, i1 * n2 + j1] = k
        return K


def assemble_affinity(Kn, Ke, A: SpatialGraph, B: SpatialGraph) -> AffinityFactors:
    Kn = np.asarray(Kn, dtype=float)
    Ke = np.asarray(Ke, dtype=float)
    if Kn.shape != (A.n_nodes, B.n_nodes):
        raise ValueError(f"Kn shape {Kn.shape} != ({A.n_nodes}, {B.n_nodes})")
    if Ke.shape != (A.n_edges, B.n_edges):
        raise ValueError(f"Ke shape {Ke.shape} != ({A.n_edges}, {B.n_edges})")
    return AffinityFactors(Kn, Ke, A.edge_index, B.edge_index)


def qap_objective(factors: AffinityFactors, X) -> float:
    """``vec(X)^T K vec(X)`` evaluated through the factors."""
    return factors.objective(X)


def build_affinity(A: SpatialGraph, B: SpatialGraph, weights: AffinityWeights = AffinityWeights(),
                   stats: NormalizationStats = None, n_samples: int = PATH_SAMPLES):
    """Distances, stats (from this pair unless given) and factors in one call."""
    dm = distance_matrices(A, B, n_samples)
    if stats is None:
        stats = normalization_stats([dm])
    factors = assemble_affinity(node_affinity(dm, weights, stats), edge_affinity(dm, weights, stats), A, B)
    return factors, dm, stats
