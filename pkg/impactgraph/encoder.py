# impactgraph/encoder.py
"""
Node embeddings E(n):
  1. content aggregation: per-slot MLPs, a Bi-GRU over the slot sequence,
     mean of the concatenated states -> F(n)
  2. type-based neighbor aggregation: one Bi-GRU per node kind over the
     sampled neighbor list S_K(n), mean of the states -> F_K(n)
  3. multi-head attention over {F(n), F_paper, F_author, F_venue} (each
     projected to a shared width d_c), heads averaged, mapped to d_E
Optional skip-gram warm start on the walk corpus.
"""

import hashlib
import logging

import numpy as np
from tqdm import tqdm

from . import autodiff as ad
from .config import FALLBACK_HASH_DIM, REFERENCE_TIME
from .errors import DataError, NumericError
from .graph_store import NodeKind
from .layers import BiGRU, Linear

logger = logging.getLogger(__name__)

EMBEDDINGS_MAGIC = b"HDGNN-EM\x01"


# ----------------------------------
# Content features
# ----------------------------------
def _digest(text):
    return int(hashlib.sha1(text.encode("utf-8")).hexdigest()[:16], 16)


def hash_bag_of_words(text, dim):
    """Signed feature hashing of whitespace tokens, scaled by 1/sqrt(#tokens)."""
    vec = np.zeros(dim)
    tokens = (text or "").lower().split()
    for tok in tokens:
        h = _digest(tok)
        vec[h % dim] += 1.0 if (h >> 32) & 1 else -1.0
    return vec / np.sqrt(len(tokens)) if tokens else vec


def hashed_vector(key, dim):
    """Deterministic pseudo-random vector for nodes without a feature."""
    rng = np.random.default_rng(_digest(key))
    return rng.standard_normal(dim) / np.sqrt(dim)


class ContentTable:
    """
    Per-kind content slots: slot names, one [N_kind, dim] matrix per slot,
    and each node's row inside its kind.
    """

    def __init__(self, slot_names, matrices, rows, kinds):
        self.slot_names = slot_names
        self.kinds = kinds
        self.matrices = matrices
        self.rows = rows

    def slot_dims(self, kind):
        return [m.shape[1] for m in self.matrices[int(kind)]]

    def features_of(self, g, n):
        """ContentFeatureSet of one node: its vector in every slot of its kind."""
        kind = g.kind(n)
        return [m[self.rows[n]] for m in self.matrices[int(kind)]]


def build_content_table(g, title_dim=64, fallback_dim=FALLBACK_HASH_DIM, degree_window=REFERENCE_TIME):
    """
    Declared `features` from nodes.jsonl become slots (sorted by name);
    nodes missing a declared slot get a hashed vector of that slot's width.
    Derived slots:
      paper  -> hashed title bag-of-words, publication year
      author -> career start year, log in/out degree
      venue  -> log in/out degree
    Degrees count only edges up to birth + degree_window, the same window the
    cascades observe.
    A kind with no declared slot and no title gets a hashed id slot.
    """
    rows = np.full(g.num_nodes, -1, dtype=np.int64)
    births = g.birth_times
    base = float(births.min()) if len(births) else 0.0
    slot_names, matrices = [], []

    for kind in NodeKind:
        ids = g.nodes_of_kind(kind)
        rows[ids] = np.arange(len(ids))
        recs = [g.nodes[i] for i in ids]

        dims = {}
        for r in recs:
            for name, vec in r.features.items():
                if dims.setdefault(name, vec.size) != vec.size:
                    raise DataError(f"feature {name!r} of {kind.label} {r.external_id!r} has width "
                                    f"{vec.size}, expected {dims[name]}")
        names, mats = [], []
        for name in sorted(dims):
            mats.append(np.stack([
                r.features[name] if name in r.features else hashed_vector(f"{r.external_id}/{name}", dims[name])
                for r in recs
            ]) if recs else np.zeros((0, dims[name])))
            names.append(name)

        has_title = any(r.title for r in recs)
        if kind == NodeKind.PAPER and has_title:
            names.append("title")
            mats.append(np.stack([
                hash_bag_of_words(r.title, title_dim) if r.title else hashed_vector(f"{r.external_id}/title", title_dim)
                for r in recs
            ]))
        if not names:
            names.append("hashed")
            mats.append(np.stack([hashed_vector(r.external_id, fallback_dim) for r in recs])
                        if recs else np.zeros((0, fallback_dim)))

        degrees = np.array([g.degrees_until(n, births[n] + degree_window) for n in ids], dtype=np.float64)
        degrees = degrees.reshape(len(ids), 2)
        log_in, log_out = np.log1p(degrees[:, 0]), np.log1p(degrees[:, 1])
        year = (births[ids] - base) / 10.0
        if kind == NodeKind.PAPER:
            names.append("year")
            mats.append(year[:, None])
        elif kind == NodeKind.AUTHOR:
            names.append("structure")
            mats.append(np.stack([year, log_in, log_out], axis=1))
        else:
            names.append("structure")
            mats.append(np.stack([log_in, log_out], axis=1))

        slot_names.append(names)
        matrices.append([np.asarray(m, dtype=np.float64).reshape(len(ids), np.shape(m)[1]) for m in mats])

    return ContentTable(slot_names, matrices, rows, g.kinds)


# ----------------------------------
# Encoder
# ----------------------------------
class NodeEncoder:
    """All encoder parameters live in `store` under the prefix 'enc.'."""

    def __init__(self, store, content, cfg):
        self.store, self.content, self.cfg = store, content, cfg
        d_h, d_n = cfg.d_h, 2 * cfg.d_h
        self.mlps = []
        for kind in NodeKind:
            layers = []
            for name, dim in zip(content.slot_names[kind], content.slot_dims(kind)):
                prefix = f"enc.content.{kind.label}.{name}"
                layers.append((Linear(store, f"{prefix}.hidden", dim, d_h), Linear(store, f"{prefix}.out", d_h, d_h)))
            self.mlps.append(layers)
        self.content_rnn = BiGRU(store, "enc.content.rnn", d_h, d_h)
        self.neighbor_rnns = [BiGRU(store, f"enc.neighbors.{k.label}", d_n, cfg.d_s // 2) for k in NodeKind]
        self.self_proj = Linear(store, "enc.proj.self", d_n, cfg.d_c)
        self.neighbor_projs = [Linear(store, f"enc.proj.{k.label}", cfg.d_s, cfg.d_c) for k in NodeKind]
        self.u = store.glorot("enc.attention.u", (2 * cfg.d_c, cfg.heads))
        self.out = Linear(store, "enc.out", cfg.d_c, cfg.d_e)

    @property
    def dim(self):
        return self.cfg.d_e

    def content_states(self, kind, rows):
        """F for rows of one kind: [len(rows), 2 d_h]."""
        slope = self.cfg.leaky_slope
        xs = []
        for (hidden, out), mat in zip(self.mlps[int(kind)], self.content.matrices[int(kind)]):
            x = ad.constant(mat[rows])
            xs.append(out(ad.leaky_relu(hidden(x), slope)))
        return self.content_rnn.mean_state(xs)

    def embed(self, nodes, neighbors):
        """E for the given NodeIds (any order, duplicates allowed): [len(nodes), d_E]."""
        nodes = np.asarray(nodes, dtype=np.int64)
        uniq, inverse = np.unique(nodes, return_inverse=True)
        members = [neighbors.of_kind(k)[uniq] for k in NodeKind]
        needed = np.unique(np.concatenate([uniq] + [m.reshape(-1) for m in members]))

        kinds = self.content.kinds
        parts, order = [], []
        for kind in NodeKind:
            sel = needed[kinds[needed] == int(kind)]
            if len(sel):
                parts.append(self.content_states(kind, self.content.rows[sel]))
                order.append(sel)
        f_all = ad.concat(parts, axis=0)
        pos = np.full(len(kinds), -1, dtype=np.int64)
        pos[np.concatenate(order)] = np.arange(len(needed))

        f_self = ad.take(f_all, pos[uniq])
        aggregated = []
        for kind, m in zip(NodeKind, members):
            xs = [ad.take(f_all, pos[m[:, j]]) for j in range(m.shape[1])]
            aggregated.append(aggregate_type_neighbors(self, kind, xs))
        e = attend(self, f_self, aggregated)
        return e if len(uniq) == len(nodes) and np.array_equal(uniq, nodes) else ad.take(e, inverse)


def aggregate_content(encoder, record):
    """F(n) for a single NodeRecord: [1, 2 d_h]."""
    return encoder.content_states(record.kind, np.array([encoder.content.rows[record.id]]))


def aggregate_type_neighbors(encoder, kind, xs):
    """Bi-GRU over the ordered neighbor list of one kind; mean of the states: [B, d_s]."""
    if not xs:
        raise ValueError("empty neighbor list")
    rnn = encoder.neighbor_rnns[int(kind)]
    return rnn.mean_state(xs)


def attention_fuse(candidates, u, slope=0.01):
    """
    Multi-head attention over a candidate list (each [B, d_c]); candidate 0 is
    the node itself. score_i = LeakyReLU(u_k . [c_0 || c_i]) per head k,
    softmax over candidates, heads averaged.
    Returns (fused [B, d_c], weights [B, M, K]).
    """
    if u.shape[1] < 1:
        raise ValueError("attention needs at least one head")
    d_c = candidates[0].shape[1]
    u_self, u_cand = ad.slice_(u, 0, d_c, axis=0), ad.slice_(u, d_c, 2 * d_c, axis=0)
    base = ad.matmul(candidates[0], u_self)
    scores = []
    for c in candidates:
        s = ad.leaky_relu(base + ad.matmul(c, u_cand), slope)
        scores.append(ad.reshape(s, (s.shape[0], 1, s.shape[1])))
    alpha = ad.softmax(ad.concat(scores, axis=1), axis=1)
    fused = None
    for i, c in enumerate(candidates):
        weight = ad.mean(ad.slice_(alpha, i, i + 1, axis=1), axis=2)
        term = weight * c
        fused = term if fused is None else fused + term
    return fused, alpha


def attend(encoder, f_self, aggregated):
    """E(n) from F(n) and the per-kind neighbor aggregates: [B, d_E]."""
    candidates = [encoder.self_proj(f_self)] + [p(a) for p, a in zip(encoder.neighbor_projs, aggregated)]
    fused, _ = attention_fuse(candidates, encoder.u, encoder.cfg.leaky_slope)
    return encoder.out(fused)


def encode_all(encoder, neighbors, batch_size=512, progress=False):
    """Numeric E for every node, in NodeId order: ndarray [N, d_E]."""
    n = len(neighbors)
    out = np.zeros((n, encoder.dim))
    for start in tqdm(range(0, n, batch_size), desc="Encoding nodes", disable=not progress):
        ids = np.arange(start, min(n, start + batch_size))
        out[ids] = encoder.embed(ids, neighbors).data
    return out


# ----------------------------------
# Skip-gram warm start
# ----------------------------------
def skipgram_pairs(walks, window, kinds=None, same_kind=False):
    """
    (center, context) pairs within `window` steps on each walk, as an [P, 2]
    array. Pairs of a node with itself are skipped; with same_kind only
    contexts of the center's kind are kept.
    """
    by_length = {}
    for walk in walks:
        by_length.setdefault(len(walk), []).append(walk)
    chunks = []
    for length in sorted(by_length):
        w = np.asarray(by_length[length], dtype=np.int64)
        for d in range(1, min(window, length - 1) + 1):
            left, right = w[:, :-d].reshape(-1), w[:, d:].reshape(-1)
            chunks.append(np.stack([left, right], axis=1))
            chunks.append(np.stack([right, left], axis=1))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.concatenate(chunks)
    keep = pairs[:, 0] != pairs[:, 1]
    if same_kind:
        keep &= kinds[pairs[:, 0]] == kinds[pairs[:, 1]]
    return pairs[keep]


class NegativeSampler:
    """Negatives drawn within the context's kind, proportional to in_degree^0.75."""

    def __init__(self, g, power=0.75):
        self.kinds = g.kinds
        self.pools = []
        for kind in NodeKind:
            ids = g.nodes_of_kind(kind)
            w = g.in_degrees[ids].astype(np.float64) ** power
            if len(ids) and w.sum() <= 0:
                w = np.ones(len(ids))
            self.pools.append((ids, w / w.sum() if len(ids) else w))

    def draw(self, contexts, count, rng):
        out = np.zeros((len(contexts), count), dtype=np.int64)
        if count == 0:
            return out
        for kind in NodeKind:
            rows = np.flatnonzero(self.kinds[contexts] == int(kind))
            ids, p = self.pools[kind]
            if len(rows):
                out[rows] = rng.choice(ids, size=(len(rows), count), p=p)
        return out


def skipgram_loss(center, context, negatives=()):
    """
    Mean over pairs of -log sigmoid(E(n).E(n_c)) - sum_neg log sigmoid(-E(n).E(m)).
    center/context: [P, d]; negatives: list of [P, d].
    """
    loss = -ad.log_sigmoid(ad.sum_(center * context, axis=1))
    for neg in negatives:
        loss = loss - ad.log_sigmoid(-ad.sum_(center * neg, axis=1))
    return ad.mean(loss)


def pretrain_skipgram(g, walks, encoder, neighbors, neg_samples, rng, pairs=None, sampler=None):
    """
    One negative-sampling objective evaluation on the walk corpus.
    Returns (loss, {param name: gradient}).
    """
    if pairs is None:
        if not walks:
            raise DataError("empty walk corpus")
        pairs = skipgram_pairs(walks, encoder.cfg.window, g.kinds)
    if len(pairs) == 0:
        raise DataError("walk corpus has no (center, context) pairs")
    negs = (sampler or NegativeSampler(g)).draw(pairs[:, 1], neg_samples, rng)

    with ad.Tape() as tape:
        ids = np.concatenate([pairs[:, 0], pairs[:, 1], negs.T.reshape(-1)])
        e = encoder.embed(ids, neighbors)
        p = len(pairs)
        center = ad.slice_(e, 0, p, axis=0)
        context = ad.slice_(e, p, 2 * p, axis=0)
        negatives = [ad.slice_(e, (2 + j) * p, (3 + j) * p, axis=0) for j in range(neg_samples)]
        loss = skipgram_loss(center, context, negatives)
    grads = ad.backward(tape, loss, encoder.store)
    return loss.item(), grads


def pretrain(g, walks, encoder, neighbors, cfg, progress=True):
    """
    Staged warm start of the encoder with Adam; each epoch visits at most
    pretrain_pairs shuffled (center, context) pairs. Returns the per-batch losses.
    """
    rng = np.random.default_rng(cfg.seed)
    pairs = skipgram_pairs(walks, cfg.window, g.kinds)
    if len(pairs) == 0:
        raise DataError("walk corpus has no (center, context) pairs")
    sampler = NegativeSampler(g)
    losses = []
    for epoch in range(cfg.pretrain_epochs):
        order = rng.permutation(len(pairs))[:cfg.pretrain_pairs]
        batches = range(0, len(order), cfg.pretrain_batch)
        for start in tqdm(batches, desc=f"Pretraining epoch {epoch + 1}", disable=not progress):
            batch = pairs[order[start:start + cfg.pretrain_batch]]
            loss, _ = pretrain_skipgram(g, walks, encoder, neighbors, cfg.neg_samples, rng,
                                         pairs=batch, sampler=sampler)
            if not np.isfinite(loss):
                raise NumericError(f"skip-gram loss became non-finite at epoch {epoch + 1}")
            ad.adam_step(encoder.store, cfg.pretrain_lr)
            losses.append(loss)
        logger.info("pretrain epoch %d: mean loss %.4f", epoch + 1, float(np.mean(losses[-len(batches):])))
    return losses


# ----------------------------------
# embeddings.bin
# ----------------------------------
def save_embeddings(matrix, path):
    matrix = np.asarray(matrix)
    n, dim = matrix.shape
    rows = np.zeros(n, dtype=np.dtype([("id", "<u8"), ("vec", "<f4", (dim,))]))
    rows["id"] = np.arange(n)
    rows["vec"] = matrix
    with open(path, "wb") as f:
        f.write(EMBEDDINGS_MAGIC)
        f.write(np.array([n], dtype="<u8").tobytes())
        f.write(np.array([dim], dtype="<u4").tobytes())
        f.write(rows.tobytes())


def load_embeddings(path):
    with open(path, "rb") as f:
        buf = f.read()
    if not buf.startswith(EMBEDDINGS_MAGIC):
        raise DataError(f"{path}: not an embeddings file (bad header)")
    pos = len(EMBEDDINGS_MAGIC)
    n = int(np.frombuffer(buf, dtype="<u8", count=1, offset=pos)[0])
    dim = int(np.frombuffer(buf, dtype="<u4", count=1, offset=pos + 8)[0])
    rows = np.frombuffer(buf, dtype=np.dtype([("id", "<u8"), ("vec", "<f4", (dim,))]), count=n, offset=pos + 12)
    out = np.zeros((n, dim))
    out[rows["id"].astype(np.int64)] = rows["vec"]
    return out
