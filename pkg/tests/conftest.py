# tests/conftest.py
"""Shared fixtures: tiny hand-built academic graphs and small model widths."""

import numpy as np
import pytest

from impactgraph.config import EncoderConfig, ModelConfig, WalkConfig
from impactgraph.graph_store import EdgeKind, GraphBuilder, NodeKind


def build_graph(nodes, edges):
    """
    nodes: (external id, kind, birth_time) or (id, kind, birth, features)
    edges: (src, dst, kind, weight, time)
    """
    b = GraphBuilder()
    for spec in nodes:
        ext, kind, birth = spec[:3]
        feats = spec[3] if len(spec) > 3 else None
        b.add_node(ext, kind, birth, features=feats)
    for src, dst, kind, weight, time in edges:
        b.add_edge(src, dst, kind, weight=weight, time=time)
    return b.finalize()


def add_paper(b, pid, t, authors, venue):
    """Paper node plus its authorship / venue edges (byline order kept)."""
    b.add_node(pid, NodeKind.PAPER, t)
    b.add_edge(pid, venue, EdgeKind.PAPER_PUBLISHED_IN_VENUE, time=t)
    for a in authors:
        b.add_edge(a, pid, EdgeKind.AUTHOR_WRITES_PAPER, time=t)
        b.add_edge(a, venue, EdgeKind.AUTHOR_PUBLISHES_VENUE, time=t)


def cite(b, citer, cited, t):
    b.add_edge(citer, cited, EdgeKind.PAPER_CITES_PAPER, time=t)


@pytest.fixture
def sampler_graph():
    """
    Six nodes: p1 -> {p2, p3, a1, v1}, p2 -> {p3, a2}, p3 -> {p1},
    a1 -> {p1, a2}, a2 -> {p2}, v1 -> {} (dead end).
    """
    nodes = [
        ("p1", "paper", 0.0), ("p2", "paper", 0.0), ("p3", "paper", 0.0),
        ("a1", "author", 0.0), ("a2", "author", 0.0), ("v1", "venue", 0.0),
    ]
    edges = [
        ("p1", "p2", "paper_cites_paper", 1.0, 1.0),
        ("p1", "p3", "paper_cites_paper", 2.0, 1.0),
        ("p1", "a1", "paper_cites_author", 1.0, 1.0),
        ("p1", "v1", "paper_published_in_venue", 0.5, 0.0),
        ("p2", "p3", "paper_cites_paper", 1.0, 1.0),
        ("p2", "a2", "paper_cites_author", 3.0, 1.0),
        ("p3", "p1", "paper_cites_paper", 1.0, 2.0),
        ("a1", "p1", "author_writes_paper", 1.0, 0.0),
        ("a1", "a2", "author_collab_author", 1.0, 0.0),
        ("a2", "p2", "author_writes_paper", 1.0, 0.0),
    ]
    return build_graph(nodes, edges)


@pytest.fixture
def academic_graph():
    """Two venues, three authors, six papers with a handful of citations."""
    b = GraphBuilder()
    b.add_node("v1", NodeKind.VENUE, 0.0)
    b.add_node("v2", NodeKind.VENUE, 0.0)
    for a in ("a1", "a2", "a3"):
        b.add_node(a, NodeKind.AUTHOR, 0.0)
    add_paper(b, "p1", 0.0, ["a1", "a2"], "v1")
    add_paper(b, "p2", 0.5, ["a2"], "v2")
    add_paper(b, "p3", 1.0, ["a3", "a1", "a2"], "v1")
    add_paper(b, "p4", 1.5, ["a3"], "v2")
    add_paper(b, "p5", 2.0, ["a1"], "v2")
    add_paper(b, "p6", 2.5, ["a2", "a3"], "v1")
    for citer, cited, t in [("p2", "p1", 0.5), ("p3", "p1", 1.0), ("p3", "p2", 1.0), ("p4", "p1", 1.5),
                            ("p5", "p3", 2.0), ("p6", "p1", 2.5), ("p6", "p4", 2.5)]:
        cite(b, citer, cited, t)
    b.add_edge("a1", "a2", EdgeKind.AUTHOR_COLLAB_AUTHOR, time=0.0)
    b.add_edge("a2", "a1", EdgeKind.AUTHOR_COLLAB_AUTHOR, time=0.0)
    return b.finalize()


@pytest.fixture
def small_walk():
    return WalkConfig(q=0.5, walk_length=8, walks_per_node=3, samples_per_type=(3, 2, 1), seed=0)


@pytest.fixture
def small_encoder_cfg():
    return EncoderConfig(d_h=3, d_s=4, d_c=3, d_e=3, heads=2, title_hash_dim=8, window=2, neg_samples=1)


@pytest.fixture
def small_model_cfg():
    return ModelConfig(gru_units=(3, 2), mlp_units=(4, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def np_gru(gru, xs, reverse=False):
    """Step-by-step reference recurrence in plain numpy."""
    H = gru.hidden
    wx, wh, bx, bh = (p.data for p in (gru.w_x, gru.w_h, gru.b_x, gru.b_h))
    sigmoid = lambda x: 1.0 / (1.0 + np.exp(-x))  # noqa: E731
    h = np.zeros((xs[0].shape[0], H))
    states = [None] * len(xs)
    for t in (range(len(xs) - 1, -1, -1) if reverse else range(len(xs))):
        gx, gh = xs[t] @ wx + bx, h @ wh + bh
        r = sigmoid(gx[:, :H] + gh[:, :H])
        z = sigmoid(gx[:, H:2 * H] + gh[:, H:2 * H])
        n = np.tanh(gx[:, 2 * H:] + r * gh[:, 2 * H:])
        h = (1.0 - z) * n + z * h
        states[t] = h
    return states


def jitter(store, seed, scale=0.3):
    """Random values for every parameter, biases included, so no pre-activation sits on a kink."""
    rng = np.random.default_rng(seed)
    for _, p in store.items():
        p.data = rng.normal(size=p.shape) * scale
