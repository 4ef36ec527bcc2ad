import json
import os

import numpy as np
import pytest

from conftest import DATA
from gvgmatch.io import (FORMAT_VERSION, GraphFormatError, graph_to_document, parse_graph, read_graph,
                         serialize_graph, write_graph, write_text_atomic)
from gvgmatch.synth import TreeSpec, build_gvg, deform, generate_tree

GOLDEN = os.path.join(DATA, "golden_graph.json")


def expect_error(doc, position):
    with pytest.raises(GraphFormatError) as info:
        parse_graph(json.dumps(doc))
    assert info.value.position == position
    return str(info.value)


def test_golden_fixture_parses_and_reserializes_byte_identical():
    with open(GOLDEN, encoding="utf-8") as fh:
        text = fh.read()
    g = parse_graph(text)
    assert g.n_nodes == 3 and g.n_edges == 2
    assert g.labels[0] == "root" and g.labels[1] is None
    np.testing.assert_allclose(g.degrees, [1.5, 1.75, 2.0])
    assert g.meta["source"] == "hand-written fixture"
    assert serialize_graph(g) == text


def test_round_trip_on_generated_graph(tmp_path):
    g = deform(build_gvg(generate_tree(TreeSpec(seed=3)), 35.0), 0.3, 1)
    path = tmp_path / "g.json"
    write_graph(path, g)
    h = read_graph(path)
    assert h.n_nodes == 80 and np.array_equal(h.edge_index, g.edge_index)
    np.testing.assert_allclose(h.coords, g.coords, rtol=0, atol=1e-12)
    np.testing.assert_allclose(h.lengths, g.lengths, rtol=1e-12)
    np.testing.assert_allclose(h.energies, g.energies, rtol=1e-12)
    np.testing.assert_allclose(h.degrees, g.degrees, rtol=1e-12)
    for p, q in zip(g.paths, h.paths):
        np.testing.assert_allclose(p, q, rtol=0, atol=1e-12)
    assert serialize_graph(h) == serialize_graph(g)


def test_syntax_error_reports_line_and_column():
    with pytest.raises(GraphFormatError) as info:
        parse_graph('{\n  "nodes": [,]\n}')
    assert info.value.position == "line 2, column 13"


def test_structural_errors_carry_positions():
    base = json.loads(open(GOLDEN).read())

    doc = json.loads(json.dumps(base))
    doc["edges"][1]["b"] = 7
    assert "does not exist" in expect_error(doc, "edges[1].b")

    doc = json.loads(json.dumps(base))
    doc["edges"][0]["b"] = 0
    doc["edges"][0]["path"][-1] = [0.0, 0.0, 0.0]
    assert "self-loop" in expect_error(doc, "edges[0]")

    doc = json.loads(json.dumps(base))
    doc["edges"].append(dict(doc["edges"][0], a=1, b=0, path=doc["edges"][0]["path"][::-1]))
    assert "duplicate edge" in expect_error(doc, "edges[2]")

    doc = json.loads(json.dumps(base))
    doc["edges"][0]["length"] = 3.0
    expect_error(doc, "edges[0].length")

    doc = json.loads(json.dumps(base))
    doc["edges"][1]["energy"] = -1.0
    expect_error(doc, "edges[1].energy")

    doc = json.loads(json.dumps(base))
    doc["nodes"][2]["id"] = 5
    expect_error(doc, "nodes[2].id")

    doc = json.loads(json.dumps(base))
    doc["edges"][0]["path"][0] = [1.0, 1.0, 1.0]
    doc["edges"][0]["length"] = 2.0 + 3.0 ** 0.5
    assert "endpoint" in expect_error(doc, "edges[0]")


def test_unknown_and_missing_fields_are_rejected():
    base = json.loads(open(GOLDEN).read())
    doc = json.loads(json.dumps(base))
    doc["nodes"][1]["radius"] = 2.0
    assert "radius" in expect_error(doc, "nodes[1]")
    doc = json.loads(json.dumps(base))
    del doc["edges"][0]["energy"]
    assert "energy" in expect_error(doc, "edges[0]")
    doc = json.loads(json.dumps(base))
    doc["format_version"] = FORMAT_VERSION + 1
    expect_error(doc, "format_version")
    doc = json.loads(json.dumps(base))
    doc["nodes"][0]["coord"] = [0.0, float("nan"), 0.0]
    with pytest.raises(GraphFormatError):
        parse_graph(json.dumps(doc))


def test_provenance_is_plain_json():
    g = build_gvg(generate_tree(TreeSpec(seed=1, n_nodes=6)), 35.0)
    doc = graph_to_document(g, {"seed": np.int64(4), "levels": (0.3, np.float64(0.4)), "arr": np.arange(2)})
    assert doc["provenance"] == {"seed": 4, "levels": [0.3, 0.4], "arr": [0, 1]}
    json.dumps(doc)


def test_read_graph_prefixes_path(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(GraphFormatError) as info:
        read_graph(bad)
    assert str(bad) in str(info.value)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    write_text_atomic(target, "new\n")
    assert target.read_text() == "new\n"
    assert sorted(os.listdir(tmp_path)) == ["out.txt"]
