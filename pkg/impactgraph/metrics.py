# impactgraph/metrics.py
"""
Evaluation metrics on (predicted count, true count) pairs:
  - MSLE: mean of (log2 c_hat - log2 c)^2
  - ACC : share of predictions with 0.5 c <= c_hat <= 1.5 c (both bounds inclusive)
plus the per-venue breakdown, report.json and predictions.csv writers.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.metrics import mean_squared_error

from .errors import DataError
from .graph_store import EdgeKind, NodeKind


def _pairs(predictions, labels):
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    c = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise DataError("no (prediction, label) pairs to score")
    if p.size != c.size:
        raise DataError(f"{p.size} predictions for {c.size} labels")
    if np.any(p <= 0) or np.any(c <= 0):
        raise DataError("predictions and labels must be positive")
    return p, c


def msle(predictions, labels) -> float:
    p, c = _pairs(predictions, labels)
    return float(mean_squared_error(np.log2(c), np.log2(p)))


def acc(predictions, labels) -> float:
    p, c = _pairs(predictions, labels)
    return float(np.mean((p >= 0.5 * c) & (p <= 1.5 * c)))


@dataclass
class EvalReport:
    msle: float
    acc: float
    n: int
    by_venue: dict = field(default_factory=dict)

    def to_dict(self):
        return {"msle": self.msle, "acc": self.acc, "n": self.n, "by_venue": self.by_venue}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def evaluate(predictions, labels, venues=None) -> EvalReport:
    """Scores one set of pairs; `venues` (one key per pair) adds the per-venue table."""
    p, c = _pairs(predictions, labels)
    report = EvalReport(msle(p, c), acc(p, c), int(p.size))
    if venues is not None:
        df = pd.DataFrame({"venue": list(venues), "p": p, "c": c})
        for venue, part in df.groupby("venue", sort=True):
            report.by_venue[str(venue)] = {
                "msle": msle(part["p"], part["c"]),
                "acc": acc(part["p"], part["c"]),
                "n": int(len(part)),
            }
    return report


def primary_venue(g, target):
    """
    Venue used to group a target: a paper's own venue; for an author the venue
    with the largest AuthorPublishesVenue weight (ties: lowest NodeId).
    """
    if g.kind(target) == NodeKind.PAPER:
        return g.venue_of(target)
    edges = g.out_edges(target, EdgeKind.AUTHOR_PUBLISHES_VENUE)
    if not edges:
        return None
    return min(edges, key=lambda e: (-e.weight, e.dst)).dst


def venue_keys(g, cascades):
    keys = []
    for c in cascades:
        v = primary_venue(g, c.target)
        keys.append(g.nodes[v].external_id if v is not None else "none")
    return keys


def save_report(report, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report.to_json() + "\n")


def predictions_frame(g, cascades, predictions) -> pd.DataFrame:
    return pd.DataFrame({
        "target_id": [g.nodes[c.target].external_id for c in cascades],
        "kind": [c.target_kind.label for c in cascades],
        "label": [int(c.label) for c in cascades],
        "prediction": np.asarray(predictions, dtype=np.float64),
    })


def save_predictions(df, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    df.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
