# impactgraph/cascade_model.py
"""
Citation cascade -> predicted log2 citation count.

  event j      : E(p_j) || E(a_j) || E(v_j)   (author / venue blocks optional)
  E(a_j)       : last state of a GRU over the first author_seq_len byline authors
  sequence     : two stacked Bi-GRUs, representation = [final fwd || final bwd]
                 of layer 2; or elementwise max / sum over the event inputs
  head         : Linear -> GeLU -> Linear -> GeLU -> Linear, y = log2 c_hat

Sequences in a batch keep their natural length: padded positions carry a
zero mask that freezes the recurrent state.
"""

import logging

import numpy as np

from . import autodiff as ad
from .encoder import NodeEncoder, build_content_table
from .errors import DataError
from .layers import GRU, BiGRU, Linear

logger = logging.getLogger(__name__)

MAX_POOL_PAD = -1e30


class CascadeModel:
    """Parameters under the prefix 'cas.'."""

    def __init__(self, store, d_e, cfg):
        self.cfg, self.d_e = cfg, d_e
        self.author_rnn = GRU(store, "cas.authors", d_e, d_e) if cfg.use_author else None
        self.width = d_e * (1 + int(cfg.use_author) + int(cfg.use_venue))
        u1, u2 = cfg.gru_units
        if cfg.aggregator == "rnn":
            self.layer1 = BiGRU(store, "cas.gru1", self.width, u1)
            self.layer2 = BiGRU(store, "cas.gru2", 2 * u1, u2)
            self.rep_dim = 2 * u2
        else:
            self.layer1 = self.layer2 = None
            self.rep_dim = self.width
        m1, m2 = cfg.mlp_units
        self.head = [
            Linear(store, "cas.head.1", self.rep_dim, m1),
            Linear(store, "cas.head.2", m1, m2),
            Linear(store, "cas.head.out", m2, 1),
        ]

    def init_output_bias(self, value):
        self.head[-1].b.data = np.full_like(self.head[-1].b.data, float(value))


# ----------------------------------
# Author aggregation
# ----------------------------------
def aggregate_authors(model, author_embeddings):
    """
    author_embeddings: list (byline order) of [B, d_e] Arrays.
    Returns the GRU's last hidden state over the first author_seq_len of them.
    """
    if not author_embeddings:
        raise DataError("citing event has no authors")
    xs = author_embeddings[:model.cfg.author_seq_len]
    return model.author_rnn.run(xs)[-1]


def _author_block(model, events, emb, pos):
    """E(a_j) for every event; events are grouped by byline length."""
    limit = model.cfg.author_seq_len
    sizes = np.array([min(len(e.authors), limit) for e in events])
    if np.any(sizes == 0):
        raise DataError("citing event has no authors")
    parts, order = [], []
    for size in np.unique(sizes):
        members = np.flatnonzero(sizes == size)
        ids = np.array([events[i].authors[:size] for i in members], dtype=np.int64)
        xs = [ad.take(emb, pos(ids[:, j])) for j in range(size)]
        parts.append(aggregate_authors(model, xs))
        order.append(members)
    inverse = np.empty(len(events), dtype=np.int64)
    inverse[np.concatenate(order)] = np.arange(len(events))
    return ad.take(ad.concat(parts, axis=0), inverse)


def event_matrix(model, events, emb, pos):
    """[len(events), width] inputs, one row per citing event."""
    blocks = [ad.take(emb, pos(np.array([e.paper for e in events], dtype=np.int64)))]
    if model.cfg.use_author:
        blocks.append(_author_block(model, events, emb, pos))
    if model.cfg.use_venue:
        blocks.append(ad.take(emb, pos(np.array([e.venue for e in events], dtype=np.int64))))
    return ad.concat(blocks, axis=1) if len(blocks) > 1 else blocks[0]


# ----------------------------------
# Sequence encoding
# ----------------------------------
def encode_batch(model, cascades, emb, pos):
    """
    Representations [B, rep_dim] of a batch of cascades.
    emb: [M, d_e] embeddings; pos maps NodeIds to rows of emb.
    """
    if any(len(c.events) == 0 for c in cascades):
        raise DataError("cascade with no observed events")
    cfg = model.cfg
    events = [e for c in cascades for e in c.events[:cfg.citation_seq_len]]
    rows = [event_matrix(model, events, emb, pos)]
    lengths = np.array([min(len(c.events), cfg.citation_seq_len) for c in cascades])
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])

    if cfg.prepend_target:
        n_blocks = 1 + int(cfg.use_author) + int(cfg.use_venue)
        target = ad.take(emb, pos(np.array([c.target for c in cascades], dtype=np.int64)))
        rows.append(ad.concat([target] * n_blocks, axis=1) if n_blocks > 1 else target)
        target_rows = lengths.sum() + np.arange(len(cascades))

    pad_value = MAX_POOL_PAD if cfg.aggregator == "max_pool" else 0.0
    rows.append(ad.constant(np.full((1, model.width), pad_value)))
    table = ad.concat(rows, axis=0)
    pad = table.shape[0] - 1

    shift = int(cfg.prepend_target)
    total = lengths + shift
    steps = int(total.max())
    idx = np.full((len(cascades), steps), pad, dtype=np.int64)
    for b, (off, n) in enumerate(zip(offsets, lengths)):
        if shift:
            idx[b, 0] = target_rows[b]
        idx[b, shift:shift + n] = off + np.arange(n)
    xs = [ad.take(table, idx[:, s]) for s in range(steps)]

    if cfg.aggregator == "max_pool":
        return ad.max_pool(xs, axis=0)
    if cfg.aggregator == "sum_pool":
        return ad.sum_pool(xs, axis=0)

    masks = [ad.constant((s < total).astype(np.float64)[:, None]) for s in range(steps)]
    h1, _, _ = model.layer1.run(xs, masks=masks)
    _, fwd, bwd = model.layer2.run(h1, masks=masks)
    return ad.concat([fwd, bwd], axis=1)


def encode_cascade(model, cascade, emb, pos):
    return encode_batch(model, [cascade], emb, pos)


def predict_log2(model, rep):
    """y = log2 c_hat, shape [B, 1]."""
    h = ad.gelu(model.head[0](rep))
    h = ad.gelu(model.head[1](h))
    return model.head[2](h)


def predict(model, rep):
    """c_hat = 2^y, strictly positive."""
    return np.exp2(predict_log2(model, rep).data[:, 0])


def training_loss(pred_log2, labels):
    """mean((log2 c_hat - log2 c)^2) over the batch."""
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if np.any(labels <= 0):
        raise DataError("labels must be positive")
    if pred_log2.shape != labels.shape:
        pred_log2 = ad.reshape(pred_log2, labels.shape)
    return ad.mean(ad.square(pred_log2 - ad.constant(np.log2(labels))))


# ----------------------------------
# Full model
# ----------------------------------
class ImpactModel:
    """
    Encoder + cascade model over one graph in a single ParameterStore.
    With finetune off (or explicit `embeddings`), node embeddings are a
    fixed matrix and only the cascade model trains.
    """

    def __init__(self, g, neighbors, enc_cfg, model_cfg, embeddings=None, seed=None):
        self.g, self.neighbors = g, neighbors
        self.enc_cfg, self.model_cfg = enc_cfg, model_cfg
        self.store = ad.ParameterStore(model_cfg.seed if seed is None else seed)
        content = build_content_table(g, enc_cfg.title_hash_dim, degree_window=enc_cfg.degree_window)
        self.encoder = NodeEncoder(self.store, content, enc_cfg)
        self.cascade = CascadeModel(self.store, enc_cfg.d_e, model_cfg)
        self.embeddings = None if embeddings is None else np.asarray(embeddings, dtype=np.float64)
        if self.embeddings is None and not enc_cfg.finetune:
            raise DataError("frozen encoder mode needs precomputed embeddings")
        if self.embeddings is not None:
            if self.embeddings.shape != (g.num_nodes, enc_cfg.d_e):
                raise DataError(f"embeddings have shape {self.embeddings.shape}, "
                                f"expected {(g.num_nodes, enc_cfg.d_e)}")
            self.store.freeze("enc.")

    def _nodes(self, cascades):
        limit = self.model_cfg.citation_seq_len
        ids = []
        for c in cascades:
            if self.model_cfg.prepend_target:
                ids.append(c.target)
            for e in c.events[:limit]:
                ids.append(e.paper)
                ids.append(e.venue)
                ids.extend(e.authors[:self.model_cfg.author_seq_len])
        return np.unique(np.array(ids, dtype=np.int64))

    def node_embeddings(self, nodes):
        if self.embeddings is not None:
            return ad.constant(self.embeddings[nodes])
        return self.encoder.embed(nodes, self.neighbors)

    def forward(self, cascades):
        """log2 predictions [B, 1]."""
        nodes = self._nodes(cascades)
        emb = self.node_embeddings(nodes)
        rep = encode_batch(self.cascade, cascades, emb, lambda ids: np.searchsorted(nodes, ids))
        return predict_log2(self.cascade, rep)

    def loss(self, cascades):
        return training_loss(self.forward(cascades), [c.label for c in cascades])

    def predict(self, cascades):
        return np.exp2(self.forward(cascades).data[:, 0])
