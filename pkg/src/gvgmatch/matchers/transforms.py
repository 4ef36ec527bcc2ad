"""Geometric transforms fitted to matched point pairs: similarity, affine and
thin-plate spline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..graph import SpatialGraph
from ..rigid import DegenerateConfigurationError

TRANSFORM_KINDS = ("similarity", "affine", "nonrigid_tps")


@dataclass(frozen=True)
class TransformEstimate:
    kind: str
    params: dict = field(default_factory=dict)

    def apply(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float).reshape(-1, 3)
        p = self.params
        if self.kind == "similarity":
            return p["scale"] * P @ p["rotation"].T + p["translation"]
        if self.kind == "affine":
            return P @ p["matrix"].T + p["translation"]
        if self.kind == "nonrigid_tps":
            U = _tps_kernel(P, p["centers"])
            return U @ p["weights"] + P @ p["linear"][1:] + p["linear"][0]
        raise ValueError(f"unknown transform kind {self.kind!r}")

    def to_dict(self):
        out = {"kind": self.kind}
        for k, v in self.params.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def _pairs(a, b, need):
    A = np.asarray(a, dtype=float).reshape(-1, 3)
    B = np.asarray(b, dtype=float).reshape(-1, 3)
    if len(A) != len(B):
        raise ValueError("point sets must pair up")
    if len(A) < need:
        raise DegenerateConfigurationError(f"need at least {need} point pairs, got {len(A)}")
    return A, B


def _rank(A):
    A0 = A - A.mean(axis=0)
    sv = np.linalg.svd(A0, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > 1e-10 * sv[0]))


def fit_similarity(a, b) -> TransformEstimate:
    """Least-squares ``s R p + t`` (Umeyama), reflections excluded."""
    A, B = _pairs(a, b, 3)
    if _rank(A) < 2:
        raise DegenerateConfigurationError("similarity fit needs non-collinear points")
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    A0, B0 = A - ca, B - cb
    U, sig, Vt = np.linalg.svd(B0.T @ A0 / len(A))
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    var_a = float(np.mean(np.sum(A0 ** 2, axis=1)))
    scale = float(np.sum(sig * np.diag(S))) / var_a
    if not scale > 0:
        raise DegenerateConfigurationError("similarity fit produced a non-positive scale")
    return TransformEstimate("similarity", {"rotation": R, "scale": scale, "translation": cb - scale * R @ ca})


def fit_affine(a, b) -> TransformEstimate:
    A, B = _pairs(a, b, 4)
    if _rank(A) < 3:
        raise DegenerateConfigurationError("affine fit needs non-coplanar points")
    H = np.hstack([A, np.ones((len(A), 1))])
    sol, *_ = np.linalg.lstsq(H, B, rcond=None)
    return TransformEstimate("affine", {"matrix": sol[:3].T.copy(), "translation": sol[3].copy()})


def _tps_kernel(P, centers):
    # biharmonic radial basis in 3-D
    return np.linalg.norm(P[:, None, :] - centers[None, :, :], axis=2)


def fit_tps(a, b, regularization: float = 1.0) -> TransformEstimate:
    """Thin-plate spline with kernel ``|r|`` and smoothing ``regularization``."""
    A, B = _pairs(a, b, 4)
    if _rank(A) < 3:
        raise DegenerateConfigurationError("thin-plate spline needs non-coplanar points")
    n = len(A)
    K = _tps_kernel(A, A) + float(regularization) * np.eye(n)
    P = np.hstack([np.ones((n, 1)), A])
    L = np.zeros((n + 4, n + 4))
    L[:n, :n] = K
    L[:n, n:] = P
    L[n:, :n] = P.T
    rhs = np.zeros((n + 4, 3))
    rhs[:n] = B
    try:
        sol = np.linalg.solve(L, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfigurationError(f"thin-plate system is singular: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise DegenerateConfigurationError("thin-plate system is ill-conditioned")
    return TransformEstimate("nonrigid_tps", {"centers": A.copy(), "weights": sol[:n], "linear": sol[n:],
                                              "regularization": float(regularization)})


def estimate_transform(pairs_a, pairs_b, kind: str, tps_regularization: float = 1.0) -> TransformEstimate:
    if kind == "similarity":
        return fit_similarity(pairs_a, pairs_b)
    if kind == "affine":
        return fit_affine(pairs_a, pairs_b)
    if kind == "nonrigid_tps":
        return fit_tps(pairs_a, pairs_b, tps_regularization)
    raise ValueError(f"unknown transform kind {kind!r}; choose from {', '.join(TRANSFORM_KINDS)}")


def warp_graph(graph: SpatialGraph, T: TransformEstimate, potential=None) -> SpatialGraph:
    """Map nodes and paths through ``T``; lengths are recomputed from the warped
    paths. Energies are carried over unless a ``potential`` is given to
    re-integrate them."""
    paths = [T.apply(p) for p in graph.paths]
    coords = T.apply(graph.coords)
    for k, (a, b) in enumerate(graph.edge_index):
        # endpoints must coincide with the warped nodes bit for bit
        paths[k][0] = coords[a]
        paths[k][-1] = coords[b]
    energies = graph.energies if potential is None else [potential.energy(p) for p in paths]
    meta = dict(graph.meta)
    meta["history"] = list(meta.get("history", [])) + [{"op": "warp", "kind": T.kind}]
    return SpatialGraph(coords, [tuple(e) for e in graph.edge_index], paths, energies,
                        labels=graph.labels, meta=meta)
