# impactgraph/hetero_sampler.py
"""
Weighted contextualized node selection: a random walk that, at every step,
steps back to the previous node with probability q, or moves to an
out-neighbor m with probability proportional to coeff(kind of m) * influence(m).
Visit counts give fixed-size per-kind neighbor sets S_paper, S_author, S_venue.
"""

import logging
from collections import Counter
from dataclasses import dataclass

import networkx as nx
import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from .errors import DataError
from .graph_store import NodeKind, dump_line

logger = logging.getLogger(__name__)

NEIGHBOR_SETS_MAGIC = b"HDGNN-NS\x01"


# ----------------------------------
# Transition probabilities
# ----------------------------------
def pagerank_scores(g):
    """Pagerank over the weighted multigraph, scaled so the mean score is 1."""
    if g.num_nodes == 0:
        return np.zeros(0)
    pr = nx.pagerank(g.nx, weight="weight") if g.num_edges else {}
    scores = np.array([pr.get(i, 1.0 / g.num_nodes) for i in range(g.num_nodes)])
    return scores * g.num_nodes


def influence(g, m, e, mode="degree", pagerank=None):
    """
    Influence of stepping to m along edge e:
      degree   -> (1 + in_degree(m)) * weight
      pagerank -> pagerank(m) * |V| * weight
    Strictly positive for any valid edge.
    """
    if e.dst != m:
        raise DataError(f"edge {e.src}->{e.dst} does not target node {m}")
    if mode == "pagerank":
        scores = pagerank if pagerank is not None else pagerank_scores(g)
        return float(scores[m]) * e.weight
    return (1.0 + g.in_degree(m)) * e.weight


def _move_weights(g, n, coeffs, mode, pagerank):
    """Unnormalized coeff * influence per out-neighbor (targets may repeat)."""
    targets, weights = [], []
    for m, e in g.neighbors(n):
        targets.append(m)
        weights.append(coeffs[int(g.kinds[m])] * influence(g, m, e, mode, pagerank))
    return targets, weights


def transition_distribution(g, n, prev, cfg, pagerank=None):
    """
    Next-node distribution {node: probability} from n with previous node prev.
    prev gets q, neighbors share 1 - q in proportion to coeff * influence.
    Returns None when n is a dead end and there is no prev: the caller
    restarts the walk at its source.
    """
    if cfg.influence == "pagerank" and pagerank is None:
        pagerank = pagerank_scores(g)
    targets, weights = _move_weights(g, n, cfg.type_coeffs, cfg.influence, pagerank)
    if not targets:
        return None if prev is None else {prev: 1.0}

    z = float(sum(weights))
    move = 1.0 if prev is None else 1.0 - cfg.q
    dist = {}
    if prev is not None:
        dist[prev] = cfg.q
    for m, w in zip(targets, weights):
        dist[m] = dist.get(m, 0.0) + move * w / z
    return dist


class WalkTable:
    """Per-node targets and cumulative move probabilities, built once per graph."""

    def __init__(self, g, cfg, pagerank=None):
        if cfg.influence == "pagerank" and pagerank is None:
            pagerank = pagerank_scores(g)
        self.targets = []
        self.cumulative = []
        for n in range(g.num_nodes):
            targets, weights = _move_weights(g, n, cfg.type_coeffs, cfg.influence, pagerank)
            w = np.asarray(weights, dtype=np.float64)
            self.targets.append(np.asarray(targets, dtype=np.int64))
            self.cumulative.append(np.cumsum(w / w.sum()) if len(w) else w)


def _substream(seed, source, walk):
    """Independent counter-based RNG per (seed, source, walk)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, source, walk])))


def walk_path(g, source, walk_index, cfg, table=None):
    """One walk of walk_length steps; returns the visited nodes (source excluded at start)."""
    table = table or WalkTable(g, cfg)
    rng = _substream(cfg.seed, source, walk_index)
    path = []
    cur, prev = source, source
    for u in rng.random(cfg.walk_length):
        targets = table.targets[cur]
        if len(targets) == 0:
            nxt = prev
        elif u < cfg.q:
            nxt = prev
        else:
            r = (u - cfg.q) / (1.0 - cfg.q)
            i = int(np.searchsorted(table.cumulative[cur], r, side="right"))
            nxt = int(targets[min(i, len(targets) - 1)])
        prev, cur = cur, nxt
        path.append(cur)
    return path


def run_walks(g, source, cfg, table=None):
    """Visit multiset (NodeId -> count) over walks_per_node walks; the source is not counted."""
    g.check(source)
    table = table or WalkTable(g, cfg)
    visits = Counter()
    for w in range(cfg.walks_per_node):
        visits.update(m for m in walk_path(g, source, w, cfg, table) if m != source)
    return visits


def generate_walks(g, cfg, sources=None, table=None):
    """Walk corpus for skip-gram: one list per walk, starting with its source."""
    table = table or WalkTable(g, cfg)
    sources = range(g.num_nodes) if sources is None else sources
    return [[s] + walk_path(g, s, w, cfg, table) for s in sources for w in range(cfg.walks_per_node)]


# ----------------------------------
# Neighbor sets
# ----------------------------------
@dataclass(frozen=True)
class NeighborSets:
    source: int
    paper: tuple
    author: tuple
    venue: tuple

    def of_kind(self, kind):
        return (self.paper, self.author, self.venue)[int(kind)]


def _fill(ranked, k):
    """Cycle the ranked nodes until the list has exactly k entries."""
    return tuple(ranked[i % len(ranked)] for i in range(k))


def build_neighbor_sets(g, source, cfg, visits=None):
    """
    Top-k most visited nodes per kind (ties: higher in_degree, then lower id).
    Short lists are padded cyclically; a kind never visited falls back to the
    source's direct neighbors of that kind, else the source itself.
    """
    if visits is None:
        visits = run_walks(g, source, cfg)
    per_kind = []
    for kind, k in zip(NodeKind, cfg.samples_per_type):
        seen = [m for m in visits if g.kinds[m] == int(kind)]
        seen.sort(key=lambda m: (-visits[m], -int(g.in_degrees[m]), m))
        ranked = seen[:k]
        if not ranked:
            ranked = list(dict.fromkeys(m for m, _ in g.neighbors(source, kind)))
        if not ranked:
            ranked = [source]
        per_kind.append(_fill(ranked, k))
    return NeighborSets(source, *per_kind)


class NeighborTable:
    """Neighbor sets for every node as three [N, k] id matrices."""

    def __init__(self, paper, author, venue):
        self.paper = np.asarray(paper, dtype=np.int64)
        self.author = np.asarray(author, dtype=np.int64)
        self.venue = np.asarray(venue, dtype=np.int64)

    def __len__(self):
        return len(self.paper)

    @property
    def samples_per_type(self):
        return tuple(m.shape[1] for m in (self.paper, self.author, self.venue))

    def of_kind(self, kind):
        return (self.paper, self.author, self.venue)[int(kind)]

    def of(self, n):
        return NeighborSets(int(n), tuple(self.paper[n].tolist()),
                            tuple(self.author[n].tolist()), tuple(self.venue[n].tolist()))

    @classmethod
    def from_sets(cls, sets):
        sets = sorted(sets, key=lambda s: s.source)
        if [s.source for s in sets] != list(range(len(sets))):
            raise DataError("neighbor sets must cover every node exactly once")
        return cls([s.paper for s in sets], [s.author for s in sets], [s.venue for s in sets])


def _sample_chunk(g, sources, cfg):
    table = WalkTable(g, cfg)
    return [build_neighbor_sets(g, s, cfg, run_walks(g, s, cfg, table)) for s in sources]


def sample_all(g, cfg, n_jobs=1, progress=True):
    """Neighbor sets for every node; sources are split across joblib workers."""
    n = g.num_nodes
    if n == 0:
        k_p, k_a, k_v = cfg.samples_per_type
        return NeighborTable(np.zeros((0, k_p)), np.zeros((0, k_a)), np.zeros((0, k_v)))
    n_chunks = max(1, min(n, 8 * n_jobs))
    chunks = [c.tolist() for c in np.array_split(np.arange(n), n_chunks)]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_sample_chunk)(g, chunk, cfg)
        for chunk in tqdm(chunks, desc="Sampling neighbors", disable=not progress)
    )
    sets = [s for chunk in results for s in chunk]
    logger.info("sampled neighbor sets for %d nodes", len(sets))
    return NeighborTable.from_sets(sets)


# ----------------------------------
# I/O
# ----------------------------------
def save_neighbor_sets(table, path):
    n = len(table)
    rows = np.concatenate(
        [np.arange(n, dtype=np.int64)[:, None], table.paper, table.author, table.venue], axis=1
    )
    with open(path, "wb") as f:
        f.write(NEIGHBOR_SETS_MAGIC)
        f.write(np.array([n], dtype="<u8").tobytes())
        f.write(np.ascontiguousarray(rows, dtype="<u8").tobytes())


def load_neighbor_sets(path, samples_per_type):
    k_p, k_a, k_v = samples_per_type
    width = 1 + k_p + k_a + k_v
    with open(path, "rb") as f:
        buf = f.read()
    if not buf.startswith(NEIGHBOR_SETS_MAGIC):
        raise DataError(f"{path}: not a neighbor-set file (bad header)")
    pos = len(NEIGHBOR_SETS_MAGIC)
    (n,) = np.frombuffer(buf, dtype="<u8", count=1, offset=pos)
    pos += 8
    if len(buf) - pos != int(n) * width * 8:
        raise DataError(f"{path}: size does not match {int(n)} nodes with samples_per_type {samples_per_type}")
    rows = np.frombuffer(buf, dtype="<u8", count=int(n) * width, offset=pos).reshape(int(n), width).astype(np.int64)
    if not np.array_equal(rows[:, 0], np.arange(int(n))):
        raise DataError(f"{path}: node ids are not dense and ordered")
    return NeighborTable(rows[:, 1:1 + k_p], rows[:, 1 + k_p:1 + k_p + k_a], rows[:, 1 + k_p + k_a:])


def save_neighbor_sets_jsonl(table, g, path):
    """Debug dump with external ids."""
    ext = [r.external_id for r in g.nodes]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for n in range(len(table)):
            f.write(dump_line({
                "id": ext[n],
                "paper": [ext[m] for m in table.paper[n]],
                "author": [ext[m] for m in table.author[n]],
                "venue": [ext[m] for m in table.venue[n]],
            }))
