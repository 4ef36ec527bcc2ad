"""Graph documents (JSON text) and atomic file output.

A document looks like::

    {
      "format_version": 1,
      "nodes": [{"id": 0, "coord": [x, y, z], "label": "BA"}, ...],
      "edges": [{"a": 0, "b": 1, "path": [[x, y, z], ...], "length": 12.5, "energy": 13.1}, ...],
      "provenance": {...}
    }

Node ids must be exactly ``0 .. n-1`` (any order). Geodesic degrees are
derived on load and never stored. Unknown keys are errors.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .graph import GraphInvariantError, SpatialGraph, polyline_length

FORMAT_VERSION = 1
_TOP_KEYS = {"format_version", "nodes", "edges", "provenance"}
_NODE_KEYS = {"id", "coord", "label"}
_EDGE_KEYS = {"a", "b", "path", "length", "energy"}
LENGTH_RTOL = 1e-9


class GraphFormatError(ValueError):
    """Malformed or inconsistent graph document; ``position`` locates the problem."""

    def __init__(self, message, position=""):
        super().__init__(f"{position}: {message}" if position else message)
        self.position = position


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GraphFormatError(f"expected a number, got {type(value).__name__}", where)
    v = float(value)
    if not math.isfinite(v):
        raise GraphFormatError("number must be finite", where)
    return v


def _index(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise GraphFormatError(f"expected an integer index, got {value!r}", where)
    return value


def _point(value, where):
    if not isinstance(value, list) or len(value) != 3:
        raise GraphFormatError("expected [x, y, z]", where)
    return [_number(v, f"{where}[{k}]") for k, v in enumerate(value)]


def _check_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise GraphFormatError(f"expected an object, got {type(obj).__name__}", where)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise GraphFormatError(f"unknown field {unknown[0]!r}", where)
    missing = [k for k in required if k not in obj]
    if missing:
        raise GraphFormatError(f"missing field {missing[0]!r}", where)


def parse_graph(text: str) -> SpatialGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    return graph_from_document(doc)


def graph_from_document(doc) -> SpatialGraph:
    _check_keys(doc, _TOP_KEYS, ("format_version", "nodes", "edges"), "document")
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise GraphFormatError(f"unsupported format_version {version!r}", "format_version")
    nodes, edges = doc["nodes"], doc["edges"]
    if not isinstance(nodes, list):
        raise GraphFormatError("expected a list", "nodes")
    if not isinstance(edges, list):
        raise GraphFormatError("expected a list", "edges")

    n = len(nodes)
    coords = np.zeros((n, 3))
    labels = [None] * n
    seen = {}
    for k, node in enumerate(nodes):
        where = f"nodes[{k}]"
        _check_keys(node, _NODE_KEYS, ("id", "coord"), where)
        i = _index(node["id"], f"{where}.id")
        if not 0 <= i < n:
            raise GraphFormatError(f"node id {i} outside 0..{n - 1}", f"{where}.id")
        if i in seen:
            raise GraphFormatError(f"duplicate node id {i} (first at nodes[{seen[i]}])", f"{where}.id")
        seen[i] = k
        coords[i] = _point(node["coord"], f"{where}.coord")
        label = node.get("label")
        if label is not None and not isinstance(label, str):
            raise GraphFormatError("label must be a string", f"{where}.label")
        labels[i] = label

    pairs, paths, lengths, energies = [], [], [], []
    first = {}
    for k, edge in enumerate(edges):
        where = f"edges[{k}]"
        _check_keys(edge, _EDGE_KEYS, ("a", "b", "path", "length", "energy"), where)
        a = _index(edge["a"], f"{where}.a")
        b = _index(edge["b"], f"{where}.b")
        for name, v in (("a", a), ("b", b)):
            if not 0 <= v < n:
                raise GraphFormatError(f"endpoint {v} does not exist ({n} nodes)", f"{where}.{name}")
        if a == b:
            raise GraphFormatError(f"self-loop on node {a}", where)
        key = (min(a, b), max(a, b))
        if key in first:
            raise GraphFormatError(f"duplicate edge {key} (first at edges[{first[key]}])", where)
        first[key] = k
        raw = edge["path"]
        if not isinstance(raw, list) or len(raw) < 2:
            raise GraphFormatError("path needs at least 2 points", f"{where}.path")
        path = np.array([_point(p, f"{where}.path[{j}]") for j, p in enumerate(raw)])
        length = _number(edge["length"], f"{where}.length")
        ref = polyline_length(path)
        if not math.isclose(length, ref, rel_tol=LENGTH_RTOL, abs_tol=1e-12):
            raise GraphFormatError(f"length {length} does not match the path's arc length {ref}", f"{where}.length")
        energy = _number(edge["energy"], f"{where}.energy")
        if energy < 0:
            raise GraphFormatError("energy must be >= 0", f"{where}.energy")
        pairs.append((a, b))
        paths.append(path)
        lengths.append(length)
        energies.append(energy)

    provenance = doc.get("provenance", {})
    if not isinstance(provenance, dict):
        raise GraphFormatError("expected an object", "provenance")
    use_labels = labels if any(l is not None for l in labels) else None
    try:
        return SpatialGraph(coords, pairs, paths, energies, lengths=lengths, labels=use_labels,
                            meta=dict(provenance))
    except GraphInvariantError as exc:
        msg = str(exc)
        if msg.startswith("edge "):
            k = int(msg.split()[1])
            raise GraphFormatError(msg.split(" ", 2)[2], f"edges[{k}]") from None
        raise GraphFormatError(msg, "document") from None


def _plain(value):
    """Make provenance values JSON-serialisable."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def graph_to_document(graph: SpatialGraph, provenance: dict = None) -> dict:
    nodes = []
    for i in range(graph.n_nodes):
        node = {"id": i, "coord": [float(v) for v in graph.coords[i]]}
        if graph.labels is not None and graph.labels[i] is not None:
            node["label"] = graph.labels[i]
        nodes.append(node)
    edges = []
    for e in range(graph.n_edges):
        a, b = graph.edge_index[e]
        edges.append({"a": int(a), "b": int(b), "path": graph.paths[e].tolist(),
                      "length": float(graph.lengths[e]), "energy": float(graph.energies[e])})
    doc = {"format_version": FORMAT_VERSION, "nodes": nodes, "edges": edges}
    prov = _plain(graph.meta if provenance is None else provenance)
    if prov:
        doc["provenance"] = prov
    return doc


def serialize_graph(graph: SpatialGraph, provenance: dict = None, indent=None) -> str:
    return json.dumps(graph_to_document(graph, provenance), indent=indent, allow_nan=False) + "\n"


def read_graph(path) -> SpatialGraph:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_graph(text)
    except GraphFormatError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None


def write_text_atomic(path, text: str):
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_graph(path, graph: SpatialGraph, provenance: dict = None):
    write_text_atomic(path, serialize_graph(graph, provenance))
