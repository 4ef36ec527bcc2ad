"""Attributed spatial graphs: nodes in R^3 joined by sampled minimal paths.

Graphs are immutable. Every mutating operation returns a new graph so the
unaltered original can serve as ground truth in benchmarks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

LENGTH_RTOL = 1e-9
ENDPOINT_TOL = 1e-6  # fraction of the bounding-box diagonal


class GraphInvariantError(ValueError):
    """A graph violates one of the data-model invariants."""


class DegeneratePathWarning(UserWarning):
    """A polyline has zero arc length."""


@dataclass(frozen=True)
class Node:
    id: int
    coord: np.ndarray
    degree_geo: float
    label: Optional[str] = None


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    path: np.ndarray
    length: float
    energy: float

    @property
    def endpoints(self):
        return frozenset((self.a, self.b))


def polyline_length(path) -> float:
    path = np.asarray(path, dtype=float)
    if len(path) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def _frozen(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


class SpatialGraph:
    """Undirected graph with 3D node coordinates and polyline edges.

    Edges are stored with ``a < b``; a path given in the opposite direction
    is reversed so that ``path[0]`` always sits on node ``a``.

    Parameters
    ----------
    coords : (n, 3) array
    edges : sequence of (a, b) index pairs
    paths : one (k, 3) array per edge, ``k >= 2``
    energies : geodesic integral energy per edge
    lengths : euclidean arc length per edge; computed from ``paths`` if omitted
    labels : optional per-node landmark names
    degrees : explicit geodesic degrees (normally derived; see ``recompute_degrees``)
    duplicates : ``"raise"`` or ``"keep_lower_energy"`` for repeated node pairs
    meta : free-form flags and provenance
    """

    def __init__(
        self,
        coords,
        edges=(),
        paths=(),
        energies=(),
        lengths=None,
        labels=None,
        degrees=None,
        duplicates: str = "raise",
        meta: Optional[dict] = None,
        validate: bool = True,
    ):
        coords = np.asarray(coords, dtype=float).reshape(-1, 3)
        n = len(coords)
        edges = [tuple(int(i) for i in e) for e in edges]
        paths = [np.asarray(p, dtype=float).reshape(-1, 3) for p in paths]
        energies = [float(u) for u in energies]
        if lengths is None:
            lengths = [polyline_length(p) for p in paths]
        else:
            lengths = [float(l) for l in lengths]
        if not (len(edges) == len(paths) == len(energies) == len(lengths)):
            raise ValueError("edges, paths, energies and lengths must have equal length")

        keep = {}
        order = []
        for k, (a, b) in enumerate(edges):
            if not (0 <= a < n and 0 <= b < n):
                raise GraphInvariantError(f"edge {k} ({a}, {b}) references a node outside 0..{n - 1}")
            if a == b:
                raise GraphInvariantError(f"edge {k} is a self-loop on node {a}")
            key = (a, b) if a < b else (b, a)
            if key in keep:
                if duplicates == "raise":
                    raise GraphInvariantError(f"edge {k} duplicates the pair {key}")
                if energies[k] < energies[keep[key]]:
                    keep[key] = k
                continue
            keep[key] = k
            order.append(key)

        edge_index = np.zeros((len(order), 2), dtype=np.int64)
        new_paths, new_lengths, new_energies = [], [], []
        for e, key in enumerate(order):
            k = keep[key]
            p = paths[k]
            if edges[k][0] != key[0]:
                p = p[::-1]
            edge_index[e] = key
            new_paths.append(_frozen(p))
            new_lengths.append(lengths[k])
            new_energies.append(energies[k])

        self.coords = _frozen(coords)
        self.edge_index = _frozen(edge_index, np.int64)
        self.paths = tuple(new_paths)
        self.lengths = _frozen(new_lengths)
        self.energies = _frozen(new_energies)
        self.labels = None if labels is None else tuple(None if l is None else str(l) for l in labels)
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels must have one entry per node")
        self._lookup = {key: e for e, key in enumerate(order)}
        self._incident = [[] for _ in range(n)]
        for e, (a, b) in enumerate(order):
            self._incident[a].append(e)
            self._incident[b].append(e)
        self.degrees = _frozen(_mean_incident_energy(n, self.edge_index, self.energies)
                               if degrees is None else degrees)
        self.meta = dict(meta or {})
        if validate:
            self.check_invariants(check_degrees=False)

    # -- basic queries ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return len(self.edge_index)

    def __len__(self):
        return self.n_nodes

    def __repr__(self):
        return f"SpatialGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"

    def node(self, i: int) -> Node:
        if not 0 <= i < self.n_nodes:
            raise IndexError(f"node {i} out of range")
        label = None if self.labels is None else self.labels[i]
        return Node(i, self.coords[i], float(self.degrees[i]), label)

    def nodes(self):
        return [self.node(i) for i in range(self.n_nodes)]

    def edge(self, e: int) -> Edge:
        a, b = self.edge_index[e]
        return Edge(int(a), int(b), self.paths[e], float(self.lengths[e]), float(self.energies[e]))

    def edges(self):
        return [self.edge(e) for e in range(self.n_edges)]

    def edge_id(self, a: int, b: int) -> Optional[int]:
        return self._lookup.get((a, b) if a < b else (b, a))

    def edge_between(self, a: int, b: int) -> Optional[Edge]:
        e = self.edge_id(a, b)
        return None if e is None else self.edge(e)

    def has_edge(self, a: int, b: int) -> bool:
        return self.edge_id(a, b) is not None

    def incident_edges(self, i: int) -> list:
        return list(self._incident[i])

    def neighbors(self, i: int) -> list:
        out = []
        for e in self._incident[i]:
            a, b = self.edge_index[e]
            out.append(int(b if a == i else a))
        return out

    def edge_keys(self):
        return set(self._lookup)

    def bbox(self):
        if self.n_nodes == 0:
            return np.zeros(3), np.zeros(3)
        return self.coords.min(axis=0), self.coords.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def endpoint_tolerance(self) -> float:
        return ENDPOINT_TOL * max(self.bbox_diagonal(), 1.0)

    # -- derived copies ---------------------------------------------------

    def replace(self, **changes) -> "SpatialGraph":
        """New graph with some constructor arguments swapped out.

        Degrees are re-derived unless passed explicitly.
        """
        kw = dict(
            coords=self.coords,
            edges=[tuple(e) for e in self.edge_index],
            paths=self.paths,
            energies=self.energies,
            lengths=self.lengths,
            labels=self.labels,
            meta=self.meta,
        )
        if "paths" in changes and "lengths" not in changes:
            kw["lengths"] = None
        kw.update(changes)
        return SpatialGraph(**kw)

    def subgraph_edges(self, keep: Iterable[int], meta: Optional[dict] = None) -> "SpatialGraph":
        keep = sorted(int(e) for e in keep)
        return SpatialGraph(
            self.coords,
            [tuple(self.edge_index[e]) for e in keep],
            [self.paths[e] for e in keep],
            [self.energies[e] for e in keep],
            lengths=[self.lengths[e] for e in keep],
            labels=self.labels,
            meta=self.meta if meta is None else meta,
        )

    def permute_nodes(self, perm) -> "SpatialGraph":
        """Relabel nodes so that old node ``i`` becomes new node ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        labels = None if self.labels is None else [self.labels[i] for i in inv]
        return SpatialGraph(
            self.coords[inv],
            [(perm[a], perm[b]) for a, b in self.edge_index],
            self.paths,
            self.energies,
            lengths=self.lengths,
            labels=labels,
            meta=self.meta,
        )

    # -- validation -------------------------------------------------------

    def check_invariants(self, check_degrees: bool = True):
        if not np.all(np.isfinite(self.coords)):
            raise GraphInvariantError("node coordinates must be finite")
        tol = self.endpoint_tolerance()
        for e in range(self.n_edges):
            p = self.paths[e]
            a, b = self.edge_index[e]
            if len(p) < 2:
                raise GraphInvariantError(f"edge {e} path has fewer than 2 points")
            if not np.all(np.isfinite(p)):
                raise GraphInvariantError(f"edge {e} path has non-finite points")
            if np.any(np.all(np.diff(p, axis=0) == 0.0, axis=1)):
                raise GraphInvariantError(f"edge {e} path repeats a point")
            if np.linalg.norm(p[0] - self.coords[a]) > tol or np.linalg.norm(p[-1] - self.coords[b]) > tol:
                raise GraphInvariantError(f"edge {e} path endpoints do not meet nodes {a} and {b}")
            ref = polyline_length(p)
            if not math.isclose(self.lengths[e], ref, rel_tol=LENGTH_RTOL, abs_tol=1e-12):
                raise GraphInvariantError(f"edge {e} length {self.lengths[e]} != arc length {ref}")
            if not self.energies[e] >= 0.0:
                raise GraphInvariantError(f"edge {e} energy must be >= 0")
        if check_degrees:
            fresh = _mean_incident_energy(self.n_nodes, self.edge_index, self.energies)
            bad = np.flatnonzero(fresh != self.degrees)
            if len(bad):
                raise GraphInvariantError(f"node {bad[0]} has a stale geodesic degree")
        return self


def _mean_incident_energy(n, edge_index, energies):
    total = np.zeros(n)
    count = np.zeros(n)
    for (a, b), u in zip(edge_index, energies):
        total[a] += u
        total[b] += u
        count[a] += 1
        count[b] += 1
    return np.divide(total, count, out=np.zeros(n), where=count > 0)


def geodesic_degree(graph: SpatialGraph, node: int) -> float:
    """Mean energy of the edges incident to ``node``; 0 for an isolated node."""
    if not 0 <= node < graph.n_nodes:
        raise IndexError(f"node {node} out of range")
    inc = graph.incident_edges(node)
    if not inc:
        return 0.0
    return float(sum(graph.energies[e] for e in inc) / len(inc))


def recompute_degrees(graph: SpatialGraph) -> SpatialGraph:
    return graph.replace(degrees=None)


def over_connect(
    nodes,
    path_provider: Callable[[Node, Node], Edge],
    radius: float = math.inf,
    labels=None,
    meta: Optional[dict] = None,
) -> SpatialGraph:
    """Join every node pair closer than ``radius`` with a provider-supplied path.

    ``nodes`` is either a sequence of :class:`Node` or an ``(n, 3)`` array.
    Pairs for which the provider raises are skipped; their indices are listed
    in ``graph.meta["skipped_pairs"]``.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if len(nodes) and isinstance(nodes[0], Node):
        coords = np.array([n.coord for n in nodes], dtype=float).reshape(-1, 3)
        if labels is None and any(n.label is not None for n in nodes):
            labels = [n.label for n in nodes]
    else:
        coords = np.asarray(nodes, dtype=float).reshape(-1, 3)
    node_objs = [Node(i, coords[i], 0.0, None if labels is None else labels[i]) for i in range(len(coords))]

    edges, paths, energies, lengths, skipped = [], [], [], [], []
    for i in range(len(coords)):
        dist = np.linalg.norm(coords[i + 1:] - coords[i], axis=1)
        for off in np.flatnonzero(dist <= radius):
            j = i + 1 + int(off)
            try:
                edge = path_provider(node_objs[i], node_objs[j])
            except Exception as exc:  # noqa: BLE001 - provider failures are reported, not fatal
                skipped.append((i, j, repr(exc)))
                continue
            path = np.asarray(edge.path, dtype=float)
            if np.linalg.norm(path[0] - coords[i]) > np.linalg.norm(path[0] - coords[j]):
                path = path[::-1]
            edges.append((i, j))
            paths.append(path)
            energies.append(edge.energy)
            lengths.append(edge.length)
    meta = dict(meta or {})
    meta["skipped_pairs"] = skipped
    meta["radius"] = radius
    return SpatialGraph(coords, edges, paths, energies, lengths=lengths, labels=labels,
                        duplicates="keep_lower_energy", meta=meta)


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[max(rx, ry)] = min(rx, ry)
        return True


def minimum_spanning_tree(graph: SpatialGraph, weight: str = "energy") -> SpatialGraph:
    """Kruskal spanning tree (or forest) minimising total edge ``weight``.

    Ties are broken by edge order. A disconnected input yields a spanning
    forest with ``meta["spanning_forest"] = True``.
    """
    if weight not in ("energy", "length"):
        raise ValueError("weight must be 'energy' or 'length'")
    w = graph.energies if weight == "energy" else graph.lengths
    order = np.argsort(w, kind="stable")
    ds = _DisjointSet(graph.n_nodes)
    keep = [int(e) for e in order if ds.union(*(int(i) for i in graph.edge_index[e]))]
    n_components = len({ds.find(i) for i in range(graph.n_nodes)})
    meta = dict(graph.meta)
    meta["spanning_forest"] = n_components > 1
    meta["mst_weight"] = weight
    return graph.subgraph_edges(keep, meta=meta)


def connected_components(graph: SpatialGraph) -> int:
    ds = _DisjointSet(graph.n_nodes)
    for a, b in graph.edge_index:
        ds.union(int(a), int(b))
    return len({ds.find(i) for i in range(graph.n_nodes)})


def polyline_resample(path, n_samples: int) -> np.ndarray:
    """Resample a polyline to ``n_samples`` points equally spaced in arc length.

    Endpoints are copied exactly. A zero-length path yields ``n_samples``
    copies of its location and emits :class:`DegeneratePathWarning`.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    path = np.asarray(path, dtype=float).reshape(-1, 3)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0.0:
        warnings.warn("zero-length polyline resampled to a single location", DegeneratePathWarning, stacklevel=2)
        return np.repeat(path[:1], n_samples, axis=0)
    target = np.linspace(0.0, total, n_samples)
    out = np.empty((n_samples, 3))
    for c in range(3):
        out[:, c] = np.interp(target, cum, path[:, c])
    out[0] = path[0]
    out[-1] = path[-1]
    return out
