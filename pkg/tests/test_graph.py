import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph, straight
from gvgmatch.graph import (DegeneratePathWarning, GraphInvariantError, SpatialGraph, connected_components,
                            geodesic_degree, minimum_spanning_tree, over_connect, polyline_length,
                            polyline_resample, recompute_degrees)
from gvgmatch.synth import TreeSpec, build_gvg, generate_tree


def test_degree_is_mean_incident_energy():
    coords = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]])
    edges = [(0, 1), (0, 2)]
    g = SpatialGraph(coords, edges, [straight(coords[a], coords[b]) for a, b in edges], [2.0, 4.0])
    assert geodesic_degree(g, 0) == 3.0
    assert geodesic_degree(g, 1) == 2.0
    assert geodesic_degree(g, 3) == 0.0
    np.testing.assert_array_equal(g.degrees, [3.0, 2.0, 4.0, 0.0])
    with pytest.raises(IndexError):
        geodesic_degree(g, 4)


def test_degree_on_generated_graph_matches_adjacency_walk():
    g = build_gvg(generate_tree(TreeSpec(seed=42, n_nodes=30)), 35.0)
    for i in range(g.n_nodes):
        inc = [g.energies[e] for e, (a, b) in enumerate(g.edge_index) if i in (a, b)]
        expect = sum(inc) / len(inc) if inc else 0.0
        assert g.degrees[i] == pytest.approx(expect, rel=1e-12)


def test_recompute_degrees_fixes_stale_values(triangle):
    stale = triangle.replace(degrees=np.array([9.0, 9.0, 9.0]))
    with pytest.raises(GraphInvariantError):
        stale.check_invariants()
    fresh = recompute_degrees(stale)
    fresh.check_invariants()
    np.testing.assert_allclose(fresh.degrees, [2.0, 1.5, 2.5])
    empty = SpatialGraph(np.zeros((3, 3)) + np.arange(3)[:, None])
    np.testing.assert_array_equal(recompute_degrees(empty).degrees, 0.0)


def test_undirected_queries(triangle):
    assert triangle.edge_between(0, 2) is not None
    assert triangle.edge_between(0, 2) == triangle.edge_between(2, 0)
    assert triangle.edge_id(2, 1) == triangle.edge_id(1, 2)
    assert not triangle.has_edge(0, 0)


def test_reversed_path_is_flipped():
    coords = np.array([[0.0, 0, 0], [1, 0, 0]])
    g = SpatialGraph(coords, [(1, 0)], [straight(coords[1], coords[0])], [1.0])
    assert tuple(g.edge_index[0]) == (0, 1)
    np.testing.assert_array_equal(g.paths[0][0], coords[0])


@pytest.mark.parametrize("edges, msg", [([(0, 5)], "outside"), ([(1, 1)], "self-loop"),
                                        ([(0, 1), (1, 0)], "duplicates")])
def test_invalid_edges_rejected(edges, msg):
    coords = np.eye(3)
    paths = [straight(coords[a % 3], coords[b % 3]) for a, b in edges]
    with pytest.raises(GraphInvariantError, match=msg):
        SpatialGraph(coords, edges, paths, [1.0] * len(edges))


def test_length_and_endpoint_invariants():
    coords = np.array([[0.0, 0, 0], [3, 4, 0]])
    path = straight(coords[0], coords[1])
    with pytest.raises(GraphInvariantError):
        SpatialGraph(coords, [(0, 1)], [path], [1.0], lengths=[4.0])
    with pytest.raises(GraphInvariantError):
        SpatialGraph(coords, [(0, 1)], [path + 1.0], [1.0])
    with pytest.raises(GraphInvariantError):
        SpatialGraph(coords, [(0, 1)], [path], [-1.0])
    assert SpatialGraph(coords, [(0, 1)], [path], [1.0]).lengths[0] == 5.0


def test_keep_lower_energy_on_duplicates():
    coords = np.eye(3)
    p = straight(coords[0], coords[1])
    g = SpatialGraph(coords, [(0, 1), (1, 0)], [p, p[::-1]], [3.0, 2.0], duplicates="keep_lower_energy")
    assert g.n_edges == 1 and g.energies[0] == 2.0


def test_permute_nodes_relabels_consistently(rng):
    g = random_graph(rng, 6)
    perm = rng.permutation(6)
    h = g.permute_nodes(perm)
    for (a, b), u in zip(g.edge_index, g.energies):
        e = h.edge_id(perm[a], perm[b])
        assert e is not None and h.energies[e] == u
    np.testing.assert_array_equal(h.coords[perm], g.coords)


# -- over-connection ---------------------------------------------------------

def _provider(na, nb):
    from gvgmatch.graph import Edge
    p = straight(na.coord, nb.coord)
    return Edge(na.id, nb.id, p, polyline_length(p), float(np.linalg.norm(nb.coord - na.coord)))


def test_over_connect_threshold():
    nodes = np.array([[0.0, 0, 0], [10, 0, 0], [20, 0, 0]])
    g = over_connect(nodes, _provider, radius=10.0)
    assert sorted(map(tuple, g.edge_index.tolist())) == [(0, 1), (1, 2)]
    full = over_connect(nodes, _provider, radius=math.inf)
    assert full.n_edges == 3


def test_over_connect_skips_failing_pairs():
    nodes = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])

    def flaky(na, nb):
        if (na.id, nb.id) == (0, 2):
            raise RuntimeError("no path")
        return _provider(na, nb)

    g = over_connect(nodes, flaky, radius=5.0)
    assert g.n_edges == 2
    assert [s[:2] for s in g.meta["skipped_pairs"]] == [(0, 2)]


@given(st.integers(0, 10_000), st.floats(1.0, 12.0))
def test_over_connect_matches_pair_count(seed, radius):
    pts = np.random.default_rng(seed).uniform(0, 10, size=(12, 3))
    g = over_connect(pts, _provider, radius=radius)
    expected = sum(1 for i in range(12) for j in range(i + 1, 12) if np.linalg.norm(pts[i] - pts[j]) <= radius)
    assert g.n_edges == expected
    for a, b in g.edge_index:
        assert np.linalg.norm(pts[a] - pts[b]) <= radius


def test_gvg_edge_count_matches_double_loop():
    tree = generate_tree(TreeSpec(seed=3))
    g = build_gvg(tree, 35.0)
    c = g.coords
    count = 0
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            if math.dist(c[i], c[j]) <= 35.0:
                count += 1
    assert g.n_edges == count


# -- minimum spanning tree -----------------------------------------------------

def _brute_force_mst_weight(g, weights):
    n = g.n_nodes
    best = math.inf
    for subset in itertools.combinations(range(g.n_edges), n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for e in subset:
            ra, rb = find(int(g.edge_index[e][0])), find(int(g.edge_index[e][1]))
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            best = min(best, sum(weights[e] for e in subset))
    return best


def test_mst_triangle(triangle):
    t = minimum_spanning_tree(triangle)
    assert sorted(t.energies.tolist()) == [1.0, 2.0]


def test_mst_of_tree_is_identity():
    tree = generate_tree(TreeSpec(seed=5, n_nodes=20))
    t = minimum_spanning_tree(tree)
    assert set(t.edge_keys()) == set(tree.edge_keys())


@given(st.integers(0, 10_000), st.integers(3, 6), st.sampled_from(["energy", "length"]))
def test_mst_is_optimal_against_enumeration(seed, n, weight):
    g = random_graph(np.random.default_rng(seed), n, p_edge=0.7, connected=True)
    t = minimum_spanning_tree(g, weight=weight)
    w = g.energies if weight == "energy" else g.lengths
    tw = t.energies if weight == "energy" else t.lengths
    assert t.n_edges == n - 1
    assert connected_components(t) == 1
    assert tw.sum() == pytest.approx(_brute_force_mst_weight(g, w), abs=1e-12)


def test_mst_on_gvg_subgraph_against_enumeration():
    g = build_gvg(generate_tree(TreeSpec(seed=7)), 35.0)
    keep = [e for e, (a, b) in enumerate(g.edge_index) if a < 6 and b < 6]
    sub = SpatialGraph(g.coords[:6], [tuple(g.edge_index[e]) for e in keep], [g.paths[e] for e in keep],
                       [g.energies[e] for e in keep])
    if connected_components(sub) == 1:
        t = minimum_spanning_tree(sub)
        assert t.energies.sum() == pytest.approx(_brute_force_mst_weight(sub, sub.energies))


def test_mst_forest_flag_and_empty():
    coords = np.array([[0.0, 0, 0], [1, 0, 0], [5, 0, 0], [6, 0, 0]])
    edges = [(0, 1), (2, 3)]
    g = SpatialGraph(coords, edges, [straight(coords[a], coords[b]) for a, b in edges], [1.0, 1.0])
    t = minimum_spanning_tree(g)
    assert t.meta["spanning_forest"] and t.n_edges == 2
    empty = SpatialGraph(np.zeros((0, 3)))
    assert minimum_spanning_tree(empty).n_edges == 0


# -- resampling ------------------------------------------------------------------

def test_resample_straight_segment():
    out = polyline_resample([[0, 0, 0], [10, 0, 0]], 3)
    np.testing.assert_allclose(out[:, 0], [0, 5, 10])


def test_resample_is_idempotent_on_uniform_polyline():
    p = straight([0, 0, 0], [3, 4, 12], 7)
    np.testing.assert_allclose(polyline_resample(p, 7), p, atol=1e-12)


def test_resample_l_shape_positions():
    p = np.array([[0.0, 0, 0], [6, 0, 0], [6, 2, 0]])
    out = polyline_resample(p, 5)
    expect = np.array([[0, 0, 0], [2, 0, 0], [4, 0, 0], [6, 0, 0], [6, 2, 0]], float)
    np.testing.assert_allclose(out, expect, atol=1e-12)


@given(st.integers(0, 10_000), st.integers(2, 60))
def test_resample_preserves_endpoints_and_spacing(seed, n):
    p = np.cumsum(np.random.default_rng(seed).normal(size=(6, 3)), axis=0)
    out = polyline_resample(p, n)
    assert len(out) == n
    assert np.array_equal(out[0], p[0]) and np.array_equal(out[-1], p[-1])
    assert polyline_length(out) <= polyline_length(p) * (1 + 1e-12)


def test_resample_spacing_along_arc():
    p = np.array([[0.0, 0, 0], [1, 0, 0], [1, 3, 0], [5, 3, 0]])
    out = polyline_resample(p, 9)
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    cum = np.concatenate([[0], np.cumsum(seg)])

    def arc_position(q):
        for k in range(len(seg)):
            d = p[k + 1] - p[k]
            t = np.dot(q - p[k], d) / np.dot(d, d)
            if -1e-12 <= t <= 1 + 1e-12 and np.linalg.norm(p[k] + t * d - q) < 1e-9:
                return cum[k] + t * seg[k]
        raise AssertionError("point not on polyline")

    pos = [arc_position(q) for q in out]
    np.testing.assert_allclose(pos, np.linspace(0, cum[-1], 9), rtol=1e-6, atol=1e-12)


def test_resample_degenerate_path_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        out = polyline_resample([[1, 2, 3], [1, 2, 3]], 4)
    assert any(issubclass(x.category, DegeneratePathWarning) for x in w)
    assert out.shape == (4, 3) and np.all(out == [1, 2, 3])
    with pytest.raises(ValueError):
        polyline_resample([[0, 0, 0], [1, 0, 0]], 1)
