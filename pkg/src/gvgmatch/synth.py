"""Synthetic vascular trees and the benchmark perturbations.

Trees are grown by repeated bifurcation inside a box, then over-connected into
geodesic graphs. Energies come from integrating a fixed oscillating potential
along each path, so they react to deformation like a geodesic cost would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from .graph import Edge, SpatialGraph, over_connect, polyline_length

DEFAULT_BBOX = ((0.0, 0.0, 0.0), (100.0, 100.0, 100.0))


@dataclass(frozen=True)
class SyntheticPotential:
    """phi(p) = 1 + A * sin(2 pi x / L) sin(2 pi y / L) sin(2 pi z / L)."""

    amplitude: float = 0.5
    wavelength: float = 25.0

    @classmethod
    def for_bbox(cls, bbox=DEFAULT_BBOX, amplitude=0.5):
        edge = float(np.min(np.subtract(bbox[1], bbox[0])))
        return cls(amplitude, edge / 4.0)

    def __call__(self, points):
        p = np.asarray(points, dtype=float) * (2.0 * np.pi / self.wavelength)
        return 1.0 + self.amplitude * np.sin(p[..., 0]) * np.sin(p[..., 1]) * np.sin(p[..., 2])

    def energy(self, path) -> float:
        """Trapezoidal line integral of phi along the polyline."""
        path = np.asarray(path, dtype=float)
        phi = self(path)
        ds = np.linalg.norm(np.diff(path, axis=0), axis=1)
        return float(np.sum(0.5 * (phi[1:] + phi[:-1]) * ds))


@dataclass(frozen=True)
class TreeSpec:
    seed: int = 0
    n_nodes: int = 80
    bbox: tuple = DEFAULT_BBOX
    branch_step: float = 20.0
    branch_angle_spread: float = math.pi / 2.5
    min_separation: float = 5.0
    sample_spacing: float = 1.5

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        lo, hi = np.asarray(self.bbox[0], float), np.asarray(self.bbox[1], float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
            raise ValueError("bbox must be a non-degenerate axis-aligned box")


def _unit(v):
    return v / np.linalg.norm(v)


def _random_perpendicular(rng, u):
    r = rng.standard_normal(3)
    r -= r.dot(u) * u
    return _unit(r)


def _curved_path(rng, p0, p1, spacing):
    chord = p1 - p0
    length = np.linalg.norm(chord)
    bend = _random_perpendicular(rng, chord / length) * rng.uniform(-0.2, 0.2) * length
    ctrl = 0.5 * (p0 + p1) + bend
    k = max(3, int(math.ceil(1.1 * length / spacing)) + 1)
    t = np.linspace(0.0, 1.0, k)[:, None]
    path = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * ctrl + t ** 2 * p1
    path[0], path[-1] = p0, p1
    return path


def straight_path(p0, p1, spacing=1.5):
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    k = max(2, int(math.ceil(np.linalg.norm(p1 - p0) / spacing)) + 1)
    t = np.linspace(0.0, 1.0, k)[:, None]
    path = p0 + t * (p1 - p0)
    path[0], path[-1] = p0, p1
    return path


def generate_tree(spec: TreeSpec, potential: Optional[SyntheticPotential] = None) -> SpatialGraph:
    """Grow a binary vascular-like tree with ``spec.n_nodes`` nodes.

    Nodes are the root, bifurcations and end points. Each edge is a gently
    curved polyline; energies integrate ``potential`` along it.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = np.asarray(spec.bbox[0], float), np.asarray(spec.bbox[1], float)
    extent = hi - lo
    margin = 0.03 * extent
    potential = potential or SyntheticPotential.for_bbox(spec.bbox)

    def inside(p):
        return bool(np.all(p >= lo + margin) and np.all(p <= hi - margin))

    coords = [lo + extent * rng.uniform(0.35, 0.65, 3)]
    heading = [_unit(rng.standard_normal(3))]
    edges, paths = [], []
    leaves = []

    def free(p, others=()):
        pts = np.asarray(coords)
        if np.min(np.linalg.norm(pts - p, axis=1)) < spec.min_separation:
            return False
        return all(np.linalg.norm(o - p) >= spec.min_separation for o in others)

    def grow(parent, direction):
        child = coords[parent] + direction * spec.branch_step * rng.uniform(0.6, 1.4)
        return child

    def attach(parent, child, direction):
        coords.append(child)
        heading.append(direction)
        edges.append((parent, len(coords) - 1))
        paths.append(_curved_path(rng, coords[parent], child, spec.sample_spacing))
        leaves.append(len(coords) - 1)

    # trunk
    for _ in range(1000):
        d = _unit(rng.standard_normal(3))
        child = grow(0, d)
        if inside(child) and free(child):
            attach(0, child, d)
            break
    else:  # pragma: no cover - a 0.3-width box always admits a trunk
        raise RuntimeError("could not place the trunk")

    dead = set()
    attempts = 0
    while len(coords) < spec.n_nodes:
        live = [l for l in leaves if l not in dead]
        if not live:
            raise RuntimeError("tree growth stalled; enlarge bbox or reduce n_nodes")
        leaf = live[int(rng.integers(len(live)))]
        u = heading[leaf]
        single = spec.n_nodes - len(coords) == 1
        placed = False
        for _ in range(25):
            attempts += 1
            r = _random_perpendicular(rng, u)
            theta = 0.5 * spec.branch_angle_spread * rng.uniform(0.6, 1.2)
            d1 = _unit(math.cos(theta) * u + math.sin(theta) * r)
            d2 = _unit(math.cos(theta) * u - math.sin(theta) * r)
            c1 = grow(leaf, d1)
            if single:
                if inside(c1) and free(c1):
                    attach(leaf, c1, d1)
                    placed = True
                    break
                continue
            c2 = grow(leaf, d2)
            if inside(c1) and inside(c2) and free(c1) and free(c2, [c1]):
                leaves.remove(leaf)
                attach(leaf, c1, d1)
                attach(leaf, c2, d2)
                placed = True
                break
        if not placed:
            # a leaf stuck against the box wall may still turn back inwards
            heading[leaf] = _unit(0.5 * (lo + hi) - coords[leaf] + rng.standard_normal(3) * 0.1 * extent)
            if attempts > 200 * spec.n_nodes:
                dead.add(leaf)

    coords = np.asarray(coords)
    energies = [potential.energy(p) for p in paths]
    meta = {"generator": "bifurcating_tree", "seed": spec.seed, "n_nodes": spec.n_nodes,
            "bbox": [list(map(float, lo)), list(map(float, hi))]}
    return SpatialGraph(coords, edges, paths, energies, meta=meta)


def build_gvg(tree: SpatialGraph, radius: float, potential: Optional[SyntheticPotential] = None,
              spacing: float = 1.5) -> SpatialGraph:
    """Over-connect ``tree`` within ``radius``.

    Tree edges inside the radius keep their curved paths; every other pair
    gets a straight path whose energy integrates the synthetic potential.
    """
    if potential is None:
        bbox = tree.meta.get("bbox")
        potential = SyntheticPotential.for_bbox(bbox) if bbox else SyntheticPotential()

    def provider(na, nb):
        e = tree.edge_id(na.id, nb.id)
        if e is not None:
            return tree.edge(e)
        path = straight_path(na.coord, nb.coord, spacing)
        return Edge(na.id, nb.id, path, polyline_length(path), potential.energy(path))

    meta = dict(tree.meta)
    meta["gvg_radius"] = radius
    return over_connect(tree.coords, provider, radius, labels=tree.labels, meta=meta)


class DisplacementField:
    """Cubic B-spline free-form displacement on a lattice over a box.

    ``offsets`` holds one 3-vector per control point, with one padding point on
    each side of the box so the spline covers it fully. Because B-spline
    weights are non-negative and sum to one, ``|field(p)|`` never exceeds the
    largest control-point magnitude.
    """

    def __init__(self, lo, hi, offsets, cells=4):
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)
        self.cells = cells
        self.spacing = np.maximum(self.hi - self.lo, 1e-9) / cells
        self.offsets = np.asarray(offsets, float)

    @classmethod
    def random(cls, lo, hi, rng, cells=4):
        return cls(lo, hi, rng.standard_normal((cells + 3,) * 3 + (3,)), cells)

    @staticmethod
    def _basis(t):
        return np.stack([
            (1 - t) ** 3 / 6.0,
            (3 * t ** 3 - 6 * t ** 2 + 4) / 6.0,
            (-3 * t ** 3 + 3 * t ** 2 + 3 * t + 1) / 6.0,
            t ** 3 / 6.0,
        ], axis=-1)

    def __call__(self, points):
        p = np.asarray(points, float).reshape(-1, 3)
        u = np.clip((p - self.lo) / self.spacing, 0.0, self.cells)
        cell = np.minimum(np.floor(u).astype(int), self.cells - 1)
        w = self._basis(u - cell)  # (n, 3 axes, 4)
        out = np.zeros_like(p)
        for i in range(4):
            for j in range(4):
                for k in range(4):
                    wt = w[:, 0, i] * w[:, 1, j] * w[:, 2, k]
                    out += wt[:, None] * self.offsets[cell[:, 0] + i, cell[:, 1] + j, cell[:, 2] + k]
        return out

    def scaled(self, factor):
        return DisplacementField(self.lo, self.hi, self.offsets * factor, self.cells)

    def sampled_max(self, extra_points=None, resolution=21):
        axes = [np.linspace(self.lo[c], self.hi[c], resolution) for c in range(3)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        if extra_points is not None:
            grid = np.vstack([grid, np.asarray(extra_points).reshape(-1, 3)])
        return float(np.linalg.norm(self(grid), axis=1).max())


def _all_points(graph):
    if graph.n_edges == 0:
        return graph.coords
    return np.vstack([graph.coords, *graph.paths])


def displacement_field(graph: SpatialGraph, fraction: float, seed: int) -> DisplacementField:
    """The smooth field ``deform`` applies, scaled to ``fraction`` of the node-set diagonal."""
    rng = np.random.default_rng(seed)
    pts = _all_points(graph)
    field = DisplacementField.random(pts.min(axis=0), pts.max(axis=0), rng)
    peak = field.sampled_max(pts)
    target = fraction * graph.bbox_diagonal()
    return field.scaled(target / peak if peak > 0 else 0.0)


def deform(graph: SpatialGraph, fraction: float, seed: int,
           potential: Optional[SyntheticPotential] = None,
           reintegrate: bool = True) -> SpatialGraph:
    """Displace every node and path point by a smooth random field.

    The field peaks at ``fraction`` times the node bounding-box diagonal.
    Lengths are re-measured and energies re-integrated along displaced paths.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    if fraction == 0.0:
        return graph
    if potential is None:
        bbox = graph.meta.get("bbox")
        potential = SyntheticPotential.for_bbox(bbox) if bbox else SyntheticPotential()
    field = displacement_field(graph, fraction, seed)
    coords = graph.coords + field(graph.coords)
    paths = []
    for e, p in enumerate(graph.paths):
        q = p + field(p)
        a, b = graph.edge_index[e]
        q[0], q[-1] = coords[a], coords[b]
        paths.append(q)
    energies = [potential.energy(p) for p in paths] if reintegrate else graph.energies
    meta = dict(graph.meta)
    meta.setdefault("history", [])
    meta["history"] = list(meta["history"]) + [{"op": "deform", "fraction": fraction, "seed": seed}]
    return graph.replace(coords=coords, paths=paths, energies=energies, meta=meta)


def _non_bridges(graph, alive):
    g = nx.Graph()
    g.add_nodes_from(range(graph.n_nodes))
    for e in alive:
        a, b = graph.edge_index[e]
        g.add_edge(int(a), int(b))
    bridges = {tuple(sorted(br)) for br in nx.bridges(g)}
    return [e for e in alive if tuple(int(i) for i in graph.edge_index[e]) not in bridges]


def prune(graph: SpatialGraph, fraction: float, seed: int, keep_connected: bool = True) -> SpatialGraph:
    """Remove ``floor(fraction * |E|)`` edges at random.

    With ``keep_connected`` edges are drawn one at a time from the current
    non-bridges; bridges are taken only once no non-bridge remains.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must be in [0, 1)")
    quota = int(math.floor(fraction * graph.n_edges + 1e-9))
    if quota == 0:
        return graph
    rng = np.random.default_rng(seed)
    alive = list(range(graph.n_edges))
    for _ in range(quota):
        pool = _non_bridges(graph, alive) if keep_connected else alive
        if not pool:
            pool = alive
        alive.remove(pool[int(rng.integers(len(pool)))])
    meta = dict(graph.meta)
    meta["history"] = list(meta.get("history", [])) + [{"op": "prune", "fraction": fraction, "seed": seed}]
    return graph.subgraph_edges(alive, meta=meta)
