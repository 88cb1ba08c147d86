# impactgraph/dataset.py
"""
Paper- and author-task datasets under the observation protocol:
  - target born at b (publication / career start), eligible if b + t_p <= horizon
  - events: citations with relative time t <= t_r, sorted by (t, citing id),
    truncated to max_seq
  - label: citations with t <= t_p
  - targets with fewer than min_observed observed citations are dropped
  - seeded 50/25/25 train/val/test split
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import train_test_split
from tqdm import tqdm

from .errors import DataError
from .graph_store import EdgeKind, NodeKind, _read_jsonl, dump_line

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class CitingEvent:
    paper: int
    authors: tuple
    venue: int
    time: float


@dataclass(frozen=True)
class Cascade:
    target: int
    target_kind: NodeKind
    events: tuple
    label: int
    observed: int
    # window statistics for the feature baseline (counted up to t_r only)
    features: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class Sample:
    cascade: Cascade
    split: str


class CascadeDataset:
    """Samples of one task plus their split assignment."""

    def __init__(self, kind, samples):
        self.kind = kind
        self.samples = list(samples)

    def __len__(self):
        return len(self.samples)

    def split(self, name):
        if name not in SPLITS:
            raise DataError(f"unknown split {name!r}")
        return [s.cascade for s in self.samples if s.split == name]

    def labels(self, name):
        return np.array([c.label for c in self.split(name)], dtype=np.float64)

    def counts(self):
        return {name: sum(1 for s in self.samples if s.split == name) for name in SPLITS}


# ----------------------------------
# Events
# ----------------------------------
def citing_event(g, citer, t):
    authors = g.authors_of(citer)
    venue = g.venue_of(citer)
    if not authors:
        raise DataError(f"citing paper {g.nodes[citer].external_id!r} has no authors")
    if venue is None:
        raise DataError(f"citing paper {g.nodes[citer].external_id!r} has no venue")
    return CitingEvent(citer, tuple(authors), venue, float(t))


def career_start(g, author):
    """Time of the author's first AuthorWritesPaper edge."""
    edges = g.out_edges(author, EdgeKind.AUTHOR_WRITES_PAPER)
    if not edges:
        raise DataError(f"author {g.nodes[author].external_id!r} has no papers")
    return min(e.time for e in edges)


def _cascade(g, target, kind, birth, citations, cfg):
    """
    citations: (citing paper, cited paper, absolute time). Relative times
    are clipped at 0 (a citation cannot precede the target's birth).
    """
    rel = sorted((max(0.0, t - birth), citer, cited) for citer, cited, t in citations)
    label = sum(1 for t, _, _ in rel if t <= cfg.t_p)
    window = [(t, citer) for t, citer, _ in rel if t <= cfg.t_r]
    events = tuple(citing_event(g, citer, t) for t, citer in window[:cfg.max_seq])
    in_deg, out_deg = g.degrees_until(target, birth + cfg.t_r)
    features = {
        "in_degree": in_deg,
        "out_degree": out_deg,
        "mean_time": float(np.mean([t for t, _ in window])) if window else 0.0,
    }
    return Cascade(target, kind, events, label, len(window), features)


def paper_cascade(g, paper, cfg):
    if g.kind(paper) != NodeKind.PAPER:
        raise DataError(f"node {g.nodes[paper].external_id!r} is not a paper")
    birth = g.nodes[paper].birth_time
    cites = [(e.src, paper, e.time) for e in g.citations_of(paper)]
    return _cascade(g, paper, NodeKind.PAPER, birth, cites, cfg)


def author_cascade(g, author, cfg):
    """Union of the citations to all of the author's papers, timed from career start."""
    if g.kind(author) != NodeKind.AUTHOR:
        raise DataError(f"node {g.nodes[author].external_id!r} is not an author")
    birth = career_start(g, author)
    cites = [(e.src, p, e.time) for p in g.papers_of(author) for e in g.citations_of(p)]
    return _cascade(g, author, NodeKind.AUTHOR, birth, cites, cfg)


# ----------------------------------
# Splits
# ----------------------------------
def split_indices(n, fractions, seed):
    """Seeded train/val/test assignment; fewer than 3 samples all go to train."""
    idx = np.arange(n)
    if n < 3:
        return idx, idx[:0], idx[:0]
    n_val = max(1, int(round(fractions[1] * n)))
    n_test = max(1, int(round(fractions[2] * n)))
    n_train = n - n_val - n_test
    if n_train < 1:
        n_train, n_val, n_test = 1, 1, n - 2
    train, rest = train_test_split(idx, train_size=n_train, random_state=seed, shuffle=True)
    val, test = train_test_split(rest, train_size=n_val, random_state=seed, shuffle=True)
    return np.sort(train), np.sort(val), np.sort(test)


def _assign(cascades, cfg):
    train, val, test = split_indices(len(cascades), cfg.split_fractions, cfg.seed)
    labels = np.empty(len(cascades), dtype=object)
    labels[train], labels[val], labels[test] = "train", "val", "test"
    return [Sample(c, str(s)) for c, s in zip(cascades, labels)]


# ----------------------------------
# Builders
# ----------------------------------
def _build(g, kind, births, make, cfg, progress):
    horizon = g.horizon
    if len(births) and horizon - min(births.values()) < cfg.t_p:
        raise DataError(
            f"data horizon {horizon:g} leaves less than t_p={cfg.t_p:g} years after the earliest {kind.label}"
        )
    cascades, dropped = [], 0
    for n in tqdm(sorted(births), desc=f"Building {kind.label} cascades", disable=not progress):
        if births[n] + cfg.t_p > horizon:
            continue
        c = make(g, n, cfg)
        # label >= 1 is needed for log-space targets
        if c.observed < cfg.min_observed or c.label < 1:
            dropped += 1
            continue
        cascades.append(c)
    logger.info("%s dataset: %d cascades kept, %d below min_observed", kind.label, len(cascades), dropped)
    return CascadeDataset(kind, _assign(cascades, cfg))


def build_paper_dataset(g, cfg, progress=False):
    births = {int(p): g.nodes[p].birth_time for p in g.nodes_of_kind(NodeKind.PAPER)}
    return _build(g, NodeKind.PAPER, births, paper_cascade, cfg, progress)


def build_author_dataset(g, cfg, progress=False):
    births = {}
    for a in g.nodes_of_kind(NodeKind.AUTHOR):
        if g.papers_of(a):
            births[int(a)] = career_start(g, a)
    return _build(g, NodeKind.AUTHOR, births, author_cascade, cfg, progress)


def build_dataset(g, kind, cfg, progress=False):
    kind = kind if isinstance(kind, NodeKind) else NodeKind.parse(kind)
    if kind == NodeKind.PAPER:
        return build_paper_dataset(g, cfg, progress)
    if kind == NodeKind.AUTHOR:
        return build_author_dataset(g, cfg, progress)
    raise DataError("only paper and author tasks exist")


# ----------------------------------
# dataset.jsonl
# ----------------------------------
def sample_to_json(g, s):
    ext = lambda n: g.nodes[n].external_id  # noqa: E731
    c = s.cascade
    return {
        "target": ext(c.target),
        "kind": c.target_kind.label,
        "split": s.split,
        "label": int(c.label),
        "observed": int(c.observed),
        "features": dict(c.features),
        "events": [
            {"paper": ext(e.paper), "authors": [ext(a) for a in e.authors], "venue": ext(e.venue), "t": e.time}
            for e in c.events
        ],
    }


def save_dataset(g, dataset, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in dataset.samples:
            f.write(dump_line(sample_to_json(g, s)))


def load_dataset(g, path):
    samples, kind = [], None
    for lineno, obj in _read_jsonl(path):
        try:
            target = g.id_of(obj["target"])
            k = NodeKind.parse(obj["kind"])
            split = obj["split"]
            if split not in SPLITS:
                raise DataError(f"unknown split {split!r}")
            events = tuple(
                CitingEvent(g.id_of(e["paper"]), tuple(g.id_of(a) for a in e["authors"]),
                            g.id_of(e["venue"]), float(e["t"]))
                for e in obj["events"]
            )
            label = int(obj["label"])
            c = Cascade(target, k, events, label, int(obj.get("observed", len(events))), obj.get("features") or {})
        except KeyError as e:
            raise DataError(f"{path}:{lineno}: missing field {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            raise DataError(f"{path}:{lineno}: {e}") from None
        except DataError as e:
            raise DataError(f"{path}:{lineno}: {e}") from None
        if label < 1:
            raise DataError(f"{path}:{lineno}: label must be positive, got {label}")
        if kind is not None and k != kind:
            raise DataError(f"{path}:{lineno}: mixed task kinds in one dataset")
        kind = k
        samples.append(Sample(c, split))
    return CascadeDataset(kind or NodeKind.PAPER, samples)


def dataset_summary(dataset):
    labels = np.array([s.cascade.label for s in dataset.samples], dtype=np.float64)
    return {
        "kind": dataset.kind.label,
        "n": len(dataset),
        "splits": dataset.counts(),
        "mean_log2_label": float(np.log2(labels).mean()) if len(labels) else None,
    }
