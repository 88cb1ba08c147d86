# impactgraph/graph_store.py
"""
Heterogeneous academic graph: paper / author / venue nodes joined by seven
kinds of weighted, directed, timestamped edges.

Build with GraphBuilder (single writer), call finalize() to get an immutable
HeteroGraph. load_graph / save_graph read and write the JSONL pair.
"""

import enum
import json
import logging
import math
import os
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

TIME_EPS = 1e-9


class NodeKind(enum.IntEnum):
    PAPER = 0
    AUTHOR = 1
    VENUE = 2

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def parse(cls, text):
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise DataError(f"unknown node kind {text!r}") from None


class EdgeKind(enum.IntEnum):
    AUTHOR_WRITES_PAPER = 0
    AUTHOR_COLLAB_AUTHOR = 1
    AUTHOR_PUBLISHES_VENUE = 2
    AUTHOR_CITES_PAPER = 3
    PAPER_PUBLISHED_IN_VENUE = 4
    PAPER_CITES_PAPER = 5
    PAPER_CITES_AUTHOR = 6

    @property
    def label(self):
        return self.name.lower()

    @property
    def signature(self):
        return EDGE_SIGNATURES[self]

    @classmethod
    def parse(cls, text):
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise DataError(f"unknown edge kind {text!r}") from None


EDGE_SIGNATURES = {
    EdgeKind.AUTHOR_WRITES_PAPER: (NodeKind.AUTHOR, NodeKind.PAPER),
    EdgeKind.AUTHOR_COLLAB_AUTHOR: (NodeKind.AUTHOR, NodeKind.AUTHOR),
    EdgeKind.AUTHOR_PUBLISHES_VENUE: (NodeKind.AUTHOR, NodeKind.VENUE),
    EdgeKind.AUTHOR_CITES_PAPER: (NodeKind.AUTHOR, NodeKind.PAPER),
    EdgeKind.PAPER_PUBLISHED_IN_VENUE: (NodeKind.PAPER, NodeKind.VENUE),
    EdgeKind.PAPER_CITES_PAPER: (NodeKind.PAPER, NodeKind.PAPER),
    EdgeKind.PAPER_CITES_AUTHOR: (NodeKind.PAPER, NodeKind.AUTHOR),
}


@dataclass(frozen=True)
class NodeRecord:
    id: int
    kind: NodeKind
    birth_time: float
    external_id: str
    features: dict = field(default_factory=dict, compare=False)
    title: str = None


@dataclass(frozen=True)
class EdgeRecord:
    src: int
    dst: int
    kind: EdgeKind
    weight: float
    time: float


# ----------------------------------
# Construction (single writer)
# ----------------------------------
class GraphBuilder:
    """
    Collects nodes and edges, validates them, merges duplicate
    (src, dst, kind) edges (weights summed, earliest time kept).
    """

    def __init__(self):
        self._nodes = []
        self._index = {}
        self._edges = {}

    def add_node(self, external_id, kind, birth_time, features=None, title=None):
        external_id = str(external_id)
        if external_id in self._index:
            raise DataError(f"duplicate node id {external_id!r}")
        kind = kind if isinstance(kind, NodeKind) else NodeKind.parse(kind)
        birth_time = float(birth_time)
        if not math.isfinite(birth_time):
            raise DataError(f"node {external_id!r}: birth_time must be finite")

        feats = {}
        for name, values in sorted((features or {}).items()):
            arr = np.asarray(values, dtype=np.float64).reshape(-1)
            if arr.size == 0:
                raise DataError(f"node {external_id!r}: feature {name!r} is empty")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"node {external_id!r}: feature {name!r} has non-finite values")
            arr.setflags(write=False)
            feats[str(name)] = arr

        node_id = len(self._nodes)
        self._nodes.append(NodeRecord(node_id, kind, birth_time, external_id, feats, title))
        self._index[external_id] = node_id
        return node_id

    def node_id(self, external_id):
        try:
            return self._index[str(external_id)]
        except KeyError:
            raise DataError(f"dangling edge endpoint {external_id!r}") from None

    def add_edge(self, src, dst, kind, weight=1.0, time=0.0):
        """Add an edge between external ids; returns the merged EdgeRecord."""
        s, d = self.node_id(src), self.node_id(dst)
        kind = kind if isinstance(kind, EdgeKind) else EdgeKind.parse(kind)
        weight, time = float(weight), float(time)

        want_src, want_dst = EDGE_SIGNATURES[kind]
        if self._nodes[s].kind != want_src or self._nodes[d].kind != want_dst:
            raise DataError(
                f"edge {src!r}->{dst!r}: {kind.label} needs {want_src.label}->{want_dst.label}, "
                f"got {self._nodes[s].kind.label}->{self._nodes[d].kind.label}"
            )
        if not (weight > 0 and math.isfinite(weight)):
            raise DataError(f"edge {src!r}->{dst!r}: weight must be positive, got {weight}")
        if not math.isfinite(time):
            raise DataError(f"edge {src!r}->{dst!r}: time must be finite")
        floor = max(self._nodes[s].birth_time, self._nodes[d].birth_time) - TIME_EPS
        if time < floor:
            raise DataError(f"edge {src!r}->{dst!r}: time {time} precedes an endpoint's birth")

        key = (s, d, kind)
        prev = self._edges.get(key)
        if prev is not None:
            weight, time = prev.weight + weight, min(prev.time, time)
        rec = EdgeRecord(s, d, kind, weight, time)
        # dict keeps first-insertion position on update
        self._edges[key] = rec
        return rec

    def finalize(self, epoch=0.0):
        return HeteroGraph(tuple(self._nodes), tuple(self._edges.values()), epoch=epoch)


# ----------------------------------
# Immutable graph
# ----------------------------------
class HeteroGraph:
    """
    Finalized, read-only typed multigraph. Safe for concurrent readers.

    The networkx MultiDiGraph (keyed by EdgeKind) is the record of truth;
    sorted per-node adjacency, degrees and kind arrays are cached for walks.
    """

    def __init__(self, nodes, edges, epoch=0.0):
        self.nodes = nodes
        self.edges = edges
        self.epoch = float(epoch)  # absolute time of t = 0
        self._index = {n.external_id: n.id for n in nodes}

        g = nx.MultiDiGraph()
        g.add_nodes_from(range(len(nodes)))
        for e in edges:
            g.add_edge(e.src, e.dst, key=e.kind, record=e, weight=e.weight)
        self.nx = nx.freeze(g)

        n = len(nodes)
        self.kinds = np.array([int(r.kind) for r in nodes], dtype=np.int64)
        self.birth_times = np.array([r.birth_time for r in nodes], dtype=np.float64)
        self.in_degrees = np.array([self.nx.in_degree(i) for i in range(n)], dtype=np.int64)
        self.out_degrees = np.array([self.nx.out_degree(i) for i in range(n)], dtype=np.int64)
        for arr in (self.kinds, self.birth_times, self.in_degrees, self.out_degrees):
            arr.setflags(write=False)

        out_lists = [[] for _ in range(n)]
        in_lists = [[] for _ in range(n)]
        for e in edges:
            out_lists[e.src].append((e.dst, e))
            in_lists[e.dst].append(e)
        # neighbors are ordered by (target NodeId, EdgeKind ordinal)
        self._out = tuple(tuple(sorted(lst, key=lambda t: (t[0], int(t[1].kind)))) for lst in out_lists)
        # in-lists keep edge insertion order (byline order for AuthorWritesPaper)
        self._in = tuple(tuple(lst) for lst in in_lists)

        self.horizon = float(max((e.time for e in edges), default=max(self.birth_times, default=0.0)))
        logger.debug("graph finalized: %d nodes, %d edges", n, len(edges))

    def __len__(self):
        return len(self.nodes)

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_edges(self):
        return len(self.edges)

    def check(self, n):
        if not (isinstance(n, (int, np.integer)) and 0 <= n < len(self.nodes)):
            raise DataError(f"invalid NodeId {n!r}")
        return int(n)

    def node(self, n):
        return self.nodes[self.check(n)]

    def kind(self, n):
        return NodeKind(int(self.kinds[self.check(n)]))

    def id_of(self, external_id):
        try:
            return self._index[str(external_id)]
        except KeyError:
            raise DataError(f"unknown node id {external_id!r}") from None

    def nodes_of_kind(self, kind):
        return np.flatnonzero(self.kinds == int(kind))

    def neighbors(self, n, kind_filter=None):
        """Out-neighbors of n as (NodeId, EdgeRecord), ordered by (target, edge kind)."""
        out = self._out[self.check(n)]
        if kind_filter is None:
            return list(out)
        return [(m, e) for m, e in out if self.kinds[m] == int(kind_filter)]

    def in_edges(self, n, kind=None):
        edges = self._in[self.check(n)]
        if kind is None:
            return list(edges)
        return [e for e in edges if e.kind == kind]

    def out_edges(self, n, kind=None):
        edges = [e for _, e in self._out[self.check(n)]]
        if kind is None:
            return edges
        return [e for e in edges if e.kind == kind]

    def in_degree(self, n):
        return int(self.in_degrees[self.check(n)])

    def out_degree(self, n):
        return int(self.out_degrees[self.check(n)])

    def degrees_until(self, n, until):
        """(in, out) edge counts of n over edges with time <= until."""
        n = self.check(n)
        return (
            sum(1 for e in self._in[n] if e.time <= until),
            sum(1 for _, e in self._out[n] if e.time <= until),
        )

    # ---- academic accessors ----
    def authors_of(self, paper):
        """Authors of a paper in byline order (first-seen AuthorWritesPaper edge order)."""
        return [e.src for e in self.in_edges(paper, EdgeKind.AUTHOR_WRITES_PAPER)]

    def venue_of(self, paper):
        venues = self.out_edges(paper, EdgeKind.PAPER_PUBLISHED_IN_VENUE)
        return venues[0].dst if venues else None

    def papers_of(self, author):
        return [e.dst for e in self.out_edges(author, EdgeKind.AUTHOR_WRITES_PAPER)]

    def citations_of(self, paper):
        """Incoming PaperCitesPaper edges."""
        return self.in_edges(paper, EdgeKind.PAPER_CITES_PAPER)


# Module-level read API
def neighbors(g, n, kind_filter=None):
    return g.neighbors(n, kind_filter)


def in_degree(g, n):
    return g.in_degree(n)


def summary(g):
    """Node counts per kind and edge counts per kind (the `ingest` report)."""
    nodes = {k.label: int(np.sum(g.kinds == int(k))) for k in NodeKind}
    edges = {k.label: 0 for k in EdgeKind}
    for e in g.edges:
        edges[e.kind.label] += 1
    return {
        "nodes": nodes,
        "edges": edges,
        "n_nodes": g.num_nodes,
        "n_edges": g.num_edges,
        "horizon": g.horizon,
    }


# ----------------------------------
# JSONL I/O
# ----------------------------------
def _read_jsonl(path):
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON ({e.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def load_graph(nodes_path, edges_path, epoch=0.0):
    """
    Load nodes.jsonl + edges.jsonl into a finalized HeteroGraph.
    External ids map to dense NodeIds in insertion order. Times are shifted
    by `epoch` (so absolute years can be stored relative to an epoch year).
    """
    builder = GraphBuilder()
    for lineno, obj in _read_jsonl(nodes_path):
        try:
            builder.add_node(
                obj["id"], obj["kind"], float(obj["birth_time"]) - epoch,
                features=obj.get("features") or {}, title=obj.get("title"),
            )
        except KeyError as e:
            raise DataError(f"{nodes_path}:{lineno}: missing field {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            raise DataError(f"{nodes_path}:{lineno}: {e}") from None
        except DataError as e:
            raise DataError(f"{nodes_path}:{lineno}: {e}") from None

    for lineno, obj in _read_jsonl(edges_path):
        try:
            builder.add_edge(
                obj["src"], obj["dst"], obj["kind"],
                weight=float(obj.get("weight", 1.0)), time=float(obj["time"]) - epoch,
            )
        except KeyError as e:
            raise DataError(f"{edges_path}:{lineno}: missing field {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            raise DataError(f"{edges_path}:{lineno}: {e}") from None
        except DataError as e:
            raise DataError(f"{edges_path}:{lineno}: {e}") from None

    g = builder.finalize(epoch=epoch)
    logger.info("loaded graph: %d nodes, %d edges", g.num_nodes, g.num_edges)
    return g


def round_sig(x, digits=9):
    return float(format(float(x), f".{digits}g"))


def _stable(obj):
    if isinstance(obj, float):
        return round_sig(obj)
    if isinstance(obj, dict):
        return {k: _stable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_stable(v) for v in obj]
    return obj


def dump_line(obj):
    """One byte-stable JSONL line: sorted keys, floats at 9 significant digits."""
    return json.dumps(_stable(obj), sort_keys=True, ensure_ascii=False) + "\n"


def node_to_json(rec, epoch=0.0):
    obj = {
        "id": rec.external_id,
        "kind": rec.kind.label,
        "birth_time": float(rec.birth_time) + epoch,
        "features": {k: [float(x) for x in v] for k, v in rec.features.items()},
    }
    if rec.title is not None:
        obj["title"] = rec.title
    return obj


def edge_to_json(g, e):
    return {
        "src": g.nodes[e.src].external_id,
        "dst": g.nodes[e.dst].external_id,
        "kind": e.kind.label,
        "weight": float(e.weight),
        "time": float(e.time) + g.epoch,
    }


def save_graph(g, nodes_path, edges_path):
    """Re-serialize a graph in absolute time (the load epoch added back); identical graphs give identical bytes."""
    for p in (nodes_path, edges_path):
        parent = os.path.dirname(os.path.abspath(p))
        os.makedirs(parent, exist_ok=True)
    with open(nodes_path, "w", encoding="utf-8", newline="\n") as f:
        for rec in g.nodes:
            f.write(dump_line(node_to_json(rec, g.epoch)))
    with open(edges_path, "w", encoding="utf-8", newline="\n") as f:
        for e in g.edges:
            f.write(dump_line(edge_to_json(g, e)))
