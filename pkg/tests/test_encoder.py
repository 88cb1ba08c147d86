# tests/test_encoder.py

import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from impactgraph import autodiff as ad
from impactgraph.config import FALLBACK_HASH_DIM
from impactgraph.encoder import (
    ContentTable, NegativeSampler, NodeEncoder, aggregate_content, aggregate_type_neighbors,
    attention_fuse, build_content_table, encode_all, hash_bag_of_words, load_embeddings, pretrain,
    pretrain_skipgram, save_embeddings, skipgram_loss, skipgram_pairs,
)
from impactgraph.errors import DataError
from impactgraph.graph_store import NodeKind
from impactgraph.hetero_sampler import generate_walks, sample_all
from impactgraph.layers import BiGRU

from .conftest import build_graph, jitter, np_gru


def np_bigru_mean(rnn, xs):
    f, b = np_gru(rnn.fwd, xs), np_gru(rnn.bwd, xs, reverse=True)
    return np.mean([np.concatenate([f[t], b[t]], axis=1) for t in range(len(xs))], axis=0)


def _zero(store, prefix):
    for name, p in store.items():
        if name.startswith(prefix):
            p.data = np.zeros_like(p.data)


@pytest.fixture
def encoder(academic_graph, small_encoder_cfg):
    store = ad.ParameterStore(seed=3)
    return NodeEncoder(store, build_content_table(academic_graph, small_encoder_cfg.title_hash_dim), small_encoder_cfg)


@pytest.fixture
def neighbors(academic_graph, small_walk):
    return sample_all(academic_graph, small_walk, progress=False)


# ----------------------------------
# Content aggregation
# ----------------------------------
def test_content_slots_per_kind(academic_graph):
    table = build_content_table(academic_graph)
    assert table.slot_names[NodeKind.PAPER] == ["hashed", "year"]
    assert table.slot_names[NodeKind.AUTHOR] == ["hashed", "structure"]
    assert table.slot_names[NodeKind.VENUE] == ["hashed", "structure"]
    assert table.slot_dims(NodeKind.AUTHOR)[1] == 3
    assert table.slot_dims(NodeKind.VENUE)[1] == 2


def test_declared_feature_slots():
    g = build_graph(
        [("p1", "paper", 0.0, {"abstract": [1.0, 2.0, 3.0]}), ("p2", "paper", 1.0), ("a1", "author", 0.0)],
        [],
    )
    table = build_content_table(g, title_dim=8)
    assert table.slot_names[NodeKind.PAPER] == ["abstract", "year"]
    feats = table.features_of(g, 0)
    assert_array_equal(feats[0], [1.0, 2.0, 3.0])
    # p2 lacks the slot: deterministic hashed stand-in of the same width
    assert table.features_of(g, 1)[0].shape == (3,)
    assert_array_equal(build_content_table(g, title_dim=8).features_of(g, 1)[0], table.features_of(g, 1)[0])


def test_kind_without_nodes_gets_empty_slots(small_encoder_cfg):
    g = build_graph([("p1", "paper", 0.0), ("p2", "paper", 1.0), ("a1", "author", 0.0)], [])
    table = build_content_table(g, title_dim=8)
    assert [m.shape for m in table.matrices[NodeKind.VENUE]] == [(0, FALLBACK_HASH_DIM), (0, 2)]
    assert table.slot_dims(NodeKind.VENUE) == [FALLBACK_HASH_DIM, 2]
    NodeEncoder(ad.ParameterStore(seed=0), table, small_encoder_cfg)


def test_structure_degrees_stop_at_the_window():
    g = build_graph(
        [("p1", "paper", 0.0), ("p2", "paper", 1.0), ("p3", "paper", 5.0), ("a1", "author", 0.0)],
        [("p2", "a1", "paper_cites_author", 1.0, 1.0), ("p3", "a1", "paper_cites_author", 1.0, 5.0),
         ("a1", "p1", "author_writes_paper", 1.0, 0.0)],
    )
    a1 = g.id_of("a1")
    early = build_content_table(g, title_dim=8, degree_window=2.0).features_of(g, a1)[-1]
    assert_allclose(early, [0.0, math.log(2.0), math.log(2.0)], rtol=0, atol=1e-15)
    late = build_content_table(g, title_dim=8, degree_window=10.0).features_of(g, a1)[-1]
    assert_allclose(late, [0.0, math.log(3.0), math.log(2.0)], rtol=0, atol=1e-15)


def test_feature_width_mismatch_rejected():
    g = build_graph([("p1", "paper", 0.0, {"x": [1.0]}), ("p2", "paper", 0.0, {"x": [1.0, 2.0]})], [])
    with pytest.raises(DataError, match="width"):
        build_content_table(g)


def test_hashed_bag_of_words():
    a = hash_bag_of_words("graph neural networks", 16)
    assert_array_equal(a, hash_bag_of_words("Graph Neural  networks", 16))
    assert np.abs(a).sum() > 0
    assert_array_equal(hash_bag_of_words("", 16), np.zeros(16))


def test_zero_content_rnn_gives_zero(encoder, academic_graph):
    _zero(encoder.store, "enc.content.rnn")
    f = aggregate_content(encoder, academic_graph.nodes[academic_graph.id_of("p3")])
    assert f.shape == (1, 2 * encoder.cfg.d_h)
    assert_array_equal(f.data, np.zeros_like(f.data))


def _mlp_outputs(encoder, g, n):
    kind = g.kind(n)
    outs = []
    for (hidden, out), c in zip(encoder.mlps[kind], encoder.content.features_of(g, n)):
        pre = c[None, :] @ hidden.w.data + hidden.b.data
        act = np.where(pre > 0, pre, encoder.cfg.leaky_slope * pre)
        outs.append(act @ out.w.data + out.b.data)
    return outs


def test_content_matches_hand_unrolled_recurrence(encoder, academic_graph):
    n = academic_graph.id_of("a2")
    f = aggregate_content(encoder, academic_graph.nodes[n])
    expected = np_bigru_mean(encoder.content_rnn, _mlp_outputs(encoder, academic_graph, n))
    assert_allclose(f.data, expected, rtol=0, atol=1e-12)


def test_single_slot_mean_is_the_state(small_encoder_cfg):
    g = build_graph([("p1", "paper", 0.0), ("a1", "author", 0.0), ("v1", "venue", 0.0)], [])
    mats = [[np.array([[0.3, -0.2]])], [np.array([[1.0, 0.5]])], [np.array([[0.0, 2.0]])]]
    table = ContentTable([["x"], ["x"], ["x"]], mats, np.zeros(3, dtype=np.int64), g.kinds)
    enc = NodeEncoder(ad.ParameterStore(seed=1), table, small_encoder_cfg)
    f = aggregate_content(enc, g.nodes[1])
    h = _mlp_outputs(enc, g, 1)
    fwd, bwd = np_gru(enc.content_rnn.fwd, h), np_gru(enc.content_rnn.bwd, h, reverse=True)
    assert_allclose(f.data, np.concatenate([fwd[0], bwd[0]], axis=1), rtol=0, atol=1e-12)


# ----------------------------------
# Neighbor aggregation
# ----------------------------------
def test_single_neighbor_is_its_own_state(encoder, rng):
    x = rng.normal(size=(2, 2 * encoder.cfg.d_h))
    out = aggregate_type_neighbors(encoder, NodeKind.AUTHOR, [ad.constant(x)])
    rnn = encoder.neighbor_rnns[NodeKind.AUTHOR]
    expected = np.concatenate([np_gru(rnn.fwd, [x])[0], np_gru(rnn.bwd, [x], reverse=True)[0]], axis=1)
    assert out.shape == (2, encoder.cfg.d_s)
    assert_allclose(out.data, expected, rtol=0, atol=1e-12)


def test_zero_neighbor_rnn_gives_zero(encoder, rng):
    _zero(encoder.store, "enc.neighbors.paper")
    xs = [ad.constant(rng.normal(size=(1, 2 * encoder.cfg.d_h))) for _ in range(3)]
    assert_array_equal(aggregate_type_neighbors(encoder, NodeKind.PAPER, xs).data, np.zeros((1, encoder.cfg.d_s)))


def test_two_neighbors_hand_unrolled(encoder, rng):
    xs = [rng.normal(size=(1, 2 * encoder.cfg.d_h)) for _ in range(2)]
    out = aggregate_type_neighbors(encoder, NodeKind.VENUE, [ad.constant(x) for x in xs])
    expected = np_bigru_mean(encoder.neighbor_rnns[NodeKind.VENUE], xs)
    assert_allclose(out.data, expected, rtol=0, atol=1e-12)


def test_width_mismatch_rejected(encoder):
    with pytest.raises(ValueError):
        aggregate_type_neighbors(encoder, NodeKind.PAPER, [ad.constant(np.ones((1, 5)))])


def test_tied_bigru_reversal_swaps_halves(rng):
    store = ad.ParameterStore(seed=8)
    rnn = BiGRU(store, "tied", 3, 4, tied=True)
    xs = [ad.constant(rng.normal(size=(2, 3))) for _ in range(5)]
    fwd = rnn.mean_state(xs).data
    rev = rnn.mean_state(xs[::-1]).data
    assert_allclose(rev[:, :4], fwd[:, 4:], rtol=0, atol=1e-12)
    assert_allclose(rev[:, 4:], fwd[:, :4], rtol=0, atol=1e-12)


# ----------------------------------
# Attention
# ----------------------------------
def test_zero_attention_is_uniform(rng):
    cands = [ad.constant(rng.normal(size=(2, 3))) for _ in range(4)]
    fused, alpha = attention_fuse(cands, ad.constant(np.zeros((6, 2))))
    assert_allclose(alpha.data, np.full((2, 4, 2), 0.25), rtol=0, atol=1e-15)
    assert_allclose(fused.data, np.mean([c.data for c in cands], axis=0), rtol=0, atol=1e-12)


def test_single_candidate(rng):
    c = ad.constant(rng.normal(size=(3, 2)))
    fused, alpha = attention_fuse([c], ad.constant(rng.normal(size=(4, 3))))
    assert_array_equal(alpha.data, np.ones((3, 1, 3)))
    assert_allclose(fused.data, c.data, rtol=0, atol=1e-15)


def test_two_heads_hand_evaluation(rng):
    d_c = 3
    cands = [rng.normal(size=(1, d_c)) for _ in range(3)]
    u = rng.normal(size=(2 * d_c, 2))
    fused, alpha = attention_fuse([ad.constant(c) for c in cands], ad.constant(u), slope=0.01)

    expected_alpha = np.zeros((3, 2))
    for k in range(2):
        scores = []
        for c in cands:
            s = (np.concatenate([cands[0], c], axis=1) @ u[:, k]).item()
            scores.append(s if s > 0 else 0.01 * s)
        e = np.exp(np.array(scores) - max(scores))
        expected_alpha[:, k] = e / e.sum()
    assert_allclose(alpha.data[0], expected_alpha, rtol=0, atol=1e-12)
    expected = sum(expected_alpha[i].mean() * cands[i] for i in range(3))
    assert_allclose(fused.data, expected, rtol=0, atol=1e-12)


def test_attention_is_a_convex_combination(rng):
    cands = [ad.constant(rng.normal(size=(5, 4))) for _ in range(4)]
    fused, alpha = attention_fuse(cands, ad.constant(rng.normal(size=(8, 3)) * 3))
    assert_allclose(alpha.data.sum(axis=1), np.ones((5, 3)), rtol=0, atol=1e-9)
    stacked = np.stack([c.data for c in cands])
    assert np.all(fused.data <= stacked.max(axis=0) + 1e-12)
    assert np.all(fused.data >= stacked.min(axis=0) - 1e-12)


# ----------------------------------
# Embeddings
# ----------------------------------
def test_embed_shapes_and_duplicates(encoder, neighbors):
    e = encoder.embed([2, 0, 2], neighbors)
    assert e.shape == (3, encoder.cfg.d_e)
    assert_allclose(e.data[0], e.data[2], rtol=0, atol=0)
    assert np.all(np.isfinite(e.data))


def test_encode_all_matches_per_node_embedding(encoder, neighbors, academic_graph):
    full = encode_all(encoder, neighbors, batch_size=4)
    assert full.shape == (academic_graph.num_nodes, encoder.cfg.d_e)
    single = encoder.embed([5], neighbors).data[0]
    assert_allclose(full[5], single, rtol=0, atol=1e-12)


def test_embeddings_file_round_trip(tmp_path, rng):
    matrix = rng.normal(size=(4, 3))
    path = tmp_path / "embeddings.bin"
    save_embeddings(matrix, path)
    raw = path.read_bytes()
    assert raw.startswith(b"HDGNN-EM\x01")
    assert len(raw) == 9 + 8 + 4 + 4 * (8 + 4 * 3)
    assert_allclose(load_embeddings(path), matrix.astype(np.float32), rtol=0, atol=0)


def test_embeddings_bad_header(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"junk")
    with pytest.raises(DataError, match="bad header"):
        load_embeddings(path)


# ----------------------------------
# Skip-gram
# ----------------------------------
def test_skipgram_loss_at_zero_dot():
    center = ad.constant([[1.0, 0.0]])
    context = ad.constant([[0.0, 1.0]])
    assert abs(skipgram_loss(center, context).item() - math.log(2)) < 1e-12
    negative = ad.constant([[0.0, -3.0]])
    assert abs(skipgram_loss(center, context, [negative]).item() - 2 * math.log(2)) < 1e-12


def test_skipgram_pairs_window_and_self_pairs():
    pairs = skipgram_pairs([[0, 1, 2], [3, 3, 4]], window=1)
    got = sorted(map(tuple, pairs.tolist()))
    assert got == sorted([(0, 1), (1, 0), (1, 2), (2, 1), (3, 4), (4, 3)])


def test_skipgram_pairs_same_kind(academic_graph):
    kinds = academic_graph.kinds
    pairs = skipgram_pairs([[0, 2, 4, 5]], window=3, kinds=kinds, same_kind=True)
    assert np.all(kinds[pairs[:, 0]] == kinds[pairs[:, 1]])


def test_negatives_share_the_context_kind(academic_graph, rng):
    sampler = NegativeSampler(academic_graph)
    contexts = np.arange(academic_graph.num_nodes)
    negs = sampler.draw(contexts, 4, rng)
    kinds = academic_graph.kinds
    assert np.all(kinds[negs] == kinds[contexts][:, None])


def test_empty_corpus_rejected(academic_graph, encoder, neighbors, rng):
    with pytest.raises(DataError, match="empty walk corpus"):
        pretrain_skipgram(academic_graph, [], encoder, neighbors, 1, rng)


def test_skipgram_gradients_match_finite_differences(academic_graph, encoder, neighbors, small_walk):
    walks = generate_walks(academic_graph, small_walk, sources=[4, 5])
    pairs = skipgram_pairs(walks, 2)[:6]

    def loss():
        return pretrain_skipgram(academic_graph, walks, encoder, neighbors, 1,
                                 np.random.default_rng(0), pairs=pairs)

    jitter(encoder.store, seed=11)
    _, grads = loss()
    pick = np.random.default_rng(1)
    for name, p in encoder.store.items():
        coords = pick.choice(p.size, size=min(3, p.size), replace=False).tolist()
        numeric = ad.numerical_gradient(lambda: loss()[0], p.data, coords=coords)
        analytic = grads[name].reshape(-1)[coords]
        assert ad.relative_error(analytic, numeric.reshape(-1)[coords]) < 1e-4, name


def test_pretrain_updates_encoder(academic_graph, encoder, neighbors, small_walk):
    before = encoder.store.snapshot()
    walks = generate_walks(academic_graph, small_walk)
    cfg = dataclasses.replace(encoder.cfg, pretrain_pairs=64, pretrain_batch=32)
    losses = pretrain(academic_graph, walks, encoder, neighbors, cfg, progress=False)
    assert len(losses) == 2 and all(np.isfinite(losses))
    after = encoder.store.snapshot()
    assert any(not np.array_equal(before[k], after[k]) for k in before)
