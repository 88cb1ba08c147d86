# tests/test_graph_store.py

import json

import pytest

from impactgraph.errors import DataError
from impactgraph.graph_store import (
    EdgeKind, GraphBuilder, NodeKind, in_degree, load_graph, neighbors, save_graph, summary,
)

from .conftest import build_graph


def _write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def _pair(tmp_path, nodes, edges):
    return _write_jsonl(tmp_path / "nodes.jsonl", nodes), _write_jsonl(tmp_path / "edges.jsonl", edges)


NODES = [
    {"id": "p1", "kind": "paper", "birth_time": 1990.0, "features": {"abstract": [0.5, 1.0]}},
    {"id": "p2", "kind": "paper", "birth_time": 1991.0},
    {"id": "a1", "kind": "author", "birth_time": 1985.0},
    {"id": "v1", "kind": "venue", "birth_time": 1950.0},
]
EDGES = [
    {"src": "p2", "dst": "p1", "kind": "paper_cites_paper", "weight": 1.0, "time": 1991.5},
    {"src": "a1", "dst": "p1", "kind": "author_writes_paper", "weight": 1.0, "time": 1990.0},
    {"src": "p1", "dst": "v1", "kind": "paper_published_in_venue", "weight": 1.0, "time": 1990.0},
    {"src": "p2", "dst": "a1", "kind": "paper_cites_author", "weight": 0.25, "time": 1991.5},
]


def test_empty_edge_file(tmp_path):
    nodes, edges = _pair(tmp_path, NODES[:3], [])
    g = load_graph(nodes, edges)
    assert g.num_nodes == 3 and g.num_edges == 0
    assert list(g.in_degrees) == [0, 0, 0]


def test_single_citation_bookkeeping():
    g = build_graph([("p1", "paper", 0.0), ("p2", "paper", 0.0)],
                    [("p1", "p2", "paper_cites_paper", 1.0, 0.0)])
    assert in_degree(g, 1) == 1
    assert g.out_degree(0) == 1


def test_neighbors_filter_and_order():
    g = build_graph(
        [("p1", "paper", 0.0), ("p2", "paper", 0.0), ("a1", "author", 0.0)],
        [("p1", "a1", "paper_cites_author", 1.0, 0.0), ("p1", "p2", "paper_cites_paper", 1.0, 0.0)],
    )
    p1, p2, a1 = g.id_of("p1"), g.id_of("p2"), g.id_of("a1")
    assert [m for m, _ in neighbors(g, p1, NodeKind.AUTHOR)] == [a1]
    # ordered by target NodeId, then edge kind
    assert [m for m, _ in neighbors(g, p1)] == [p2, a1]
    assert neighbors(g, p1) == neighbors(g, p1)
    assert neighbors(g, a1) == []


def test_neighbors_same_target_ordered_by_edge_kind():
    g = build_graph(
        [("a1", "author", 0.0), ("p1", "paper", 0.0)],
        [("a1", "p1", "author_cites_paper", 1.0, 0.0), ("a1", "p1", "author_writes_paper", 1.0, 0.0)],
    )
    kinds = [e.kind for _, e in g.neighbors(0)]
    assert kinds == [EdgeKind.AUTHOR_WRITES_PAPER, EdgeKind.AUTHOR_CITES_PAPER]


def test_star_in_degree():
    nodes = [("hub", "paper", 0.0)] + [(f"c{i}", "paper", 0.0) for i in range(5)]
    edges = [(f"c{i}", "hub", "paper_cites_paper", 1.0, 1.0) for i in range(5)]
    g = build_graph(nodes, edges)
    assert g.in_degree(g.id_of("hub")) == 5
    assert int(g.in_degrees.sum()) == g.num_edges


def test_invalid_node_id():
    g = build_graph([("p1", "paper", 0.0)], [])
    with pytest.raises(DataError, match="invalid NodeId"):
        g.neighbors(3)
    with pytest.raises(DataError):
        g.in_degree(-1)


@pytest.mark.parametrize("edge, message", [
    (("p1", "v1", "paper_cites_paper", 1.0, 0.0), "needs paper->paper"),
    (("p1", "zz", "paper_cites_paper", 1.0, 0.0), "dangling"),
    (("p1", "v1", "paper_published_in_venue", 0.0, 0.0), "weight must be positive"),
    (("p1", "v1", "paper_published_in_venue", 1.0, -1.0), "precedes"),
    (("p1", "v1", "no_such_kind", 1.0, 0.0), "unknown edge kind"),
])
def test_edge_validation(edge, message):
    with pytest.raises(DataError, match=message):
        build_graph([("p1", "paper", 0.0), ("v1", "venue", 0.0)], [edge])


def test_duplicate_node_id():
    with pytest.raises(DataError, match="duplicate node id"):
        build_graph([("p1", "paper", 0.0), ("p1", "author", 0.0)], [])


def test_duplicate_edges_merge():
    g = build_graph(
        [("p1", "paper", 0.0), ("p2", "paper", 0.0)],
        [("p1", "p2", "paper_cites_paper", 1.0, 3.0), ("p1", "p2", "paper_cites_paper", 0.5, 2.0)],
    )
    assert g.num_edges == 1
    e = g.edges[0]
    assert e.weight == 1.5 and e.time == 2.0
    assert g.in_degree(1) == 1


def test_byline_order_is_insertion_order():
    b = GraphBuilder()
    b.add_node("p1", NodeKind.PAPER, 0.0)
    for a in ("a3", "a1", "a2"):
        b.add_node(a, NodeKind.AUTHOR, 0.0)
    for a in ("a2", "a3", "a1"):
        b.add_edge(a, "p1", EdgeKind.AUTHOR_WRITES_PAPER)
    g = b.finalize()
    assert [g.nodes[a].external_id for a in g.authors_of(0)] == ["a2", "a3", "a1"]


def test_load_reports_line_numbers(tmp_path):
    nodes = tmp_path / "nodes.jsonl"
    nodes.write_text(json.dumps(NODES[0]) + "\n{not json\n", encoding="utf-8")
    edges = _write_jsonl(tmp_path / "edges.jsonl", [])
    with pytest.raises(DataError, match=r"nodes.jsonl:2"):
        load_graph(nodes, edges)


def test_load_reports_dangling_edge_line(tmp_path):
    nodes, edges = _pair(tmp_path, NODES, EDGES + [
        {"src": "p9", "dst": "p1", "kind": "paper_cites_paper", "weight": 1.0, "time": 1992.0},
    ])
    with pytest.raises(DataError, match=r"edges.jsonl:5: dangling"):
        load_graph(nodes, edges)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_graph(tmp_path / "nope.jsonl", tmp_path / "nope2.jsonl")


def test_epoch_shift(tmp_path):
    nodes, edges = _pair(tmp_path, NODES, EDGES)
    g = load_graph(nodes, edges, epoch=1990.0)
    assert g.nodes[g.id_of("p2")].birth_time == 1.0
    assert g.horizon == 1.5


def test_round_trip_keeps_absolute_times_under_an_epoch(tmp_path):
    nodes, edges = _pair(tmp_path, NODES, EDGES)
    g = load_graph(nodes, edges, epoch=1990.0)
    assert g.epoch == 1990.0
    out = tmp_path / "saved"
    save_graph(g, out / "nodes.jsonl", out / "edges.jsonl")

    saved = [json.loads(line) for line in (out / "edges.jsonl").read_text(encoding="utf-8").splitlines()]
    assert sorted(e["time"] for e in saved) == [1990.0, 1990.0, 1991.5, 1991.5]
    again = load_graph(out / "nodes.jsonl", out / "edges.jsonl", epoch=1990.0)
    assert sorted(e.time for e in again.edges) == sorted(e.time for e in g.edges) == [0.0, 0.0, 1.5, 1.5]
    assert again.nodes[again.id_of("v1")].birth_time == -40.0


def test_round_trip_is_byte_stable(tmp_path):
    nodes, edges = _pair(tmp_path, NODES, EDGES)
    g = load_graph(nodes, edges)
    out1, out2 = tmp_path / "one", tmp_path / "two"
    save_graph(g, out1 / "nodes.jsonl", out1 / "edges.jsonl")
    g2 = load_graph(out1 / "nodes.jsonl", out1 / "edges.jsonl")
    save_graph(g2, out2 / "nodes.jsonl", out2 / "edges.jsonl")

    assert (out1 / "nodes.jsonl").read_bytes() == (out2 / "nodes.jsonl").read_bytes()
    assert (out1 / "edges.jsonl").read_bytes() == (out2 / "edges.jsonl").read_bytes()
    assert g2.num_nodes == g.num_nodes
    assert sorted((e.src, e.dst, e.kind, e.weight) for e in g2.edges) == \
        sorted((e.src, e.dst, e.kind, e.weight) for e in g.edges)
    assert list(g2.in_degrees) == list(g.in_degrees)


def test_summary_counts(academic_graph):
    info = summary(academic_graph)
    assert info["nodes"] == {"paper": 6, "author": 3, "venue": 2}
    assert info["edges"]["paper_cites_paper"] == 7
    assert info["n_edges"] == academic_graph.num_edges
