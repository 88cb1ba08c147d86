# impactgraph/analytics.py
"""
Descriptive statistics of a citation graph (the `stats` stage):
CCDFs of citation counts, year-by-year Pearson correlations of cumulative
citations, and the author productivity profile.
"""

import logging

import numpy as np
import pandas as pd

from .config import PREDICTION_TIME, REFERENCE_TIME, ObservationConfig
from .dataset import career_start
from .errors import DataError
from .graph_store import EdgeKind, NodeKind

logger = logging.getLogger(__name__)

DEFAULT_YEARS = 10


def ccdf(values):
    """[(x, P(X >= x))] at each distinct value, ascending x."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise DataError("ccdf of an empty sample")
    xs, counts = np.unique(v, return_counts=True)
    at_least = v.size - np.concatenate([[0], np.cumsum(counts)[:-1]])
    return [(float(x), float(n) / v.size) for x, n in zip(xs, at_least)]


def tail_slope(points, x_min=1.0):
    """Least-squares slope of log P(X >= x) against log x over x >= x_min."""
    pts = np.array([(x, p) for x, p in points if x >= x_min and x > 0 and p > 0])
    if len(pts) < 2:
        return None
    slope, _ = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(slope)


# ----------------------------------
# Yearly matrices
# ----------------------------------
def _eligible(g, births, years):
    return {n: b for n, b in births.items() if b + years <= g.horizon}


def _citation_times(g, n):
    if g.kind(n) == NodeKind.PAPER:
        return [e.time for e in g.citations_of(n)]
    return [e.time for p in g.papers_of(n) for e in g.citations_of(p)]


def entity_births(g, kind):
    if kind == NodeKind.PAPER:
        return {int(p): g.nodes[p].birth_time for p in g.nodes_of_kind(kind)}
    return {int(a): career_start(g, a) for a in g.nodes_of_kind(kind) if g.papers_of(a)}


def yearly_citations(g, kind=NodeKind.PAPER, years=DEFAULT_YEARS):
    """
    Cumulative citations at the end of each of the first `years` years
    (rows: external ids of entities old enough; columns: 1..years).
    """
    births = _eligible(g, entity_births(g, kind), years)
    rows = {}
    for n, b in sorted(births.items()):
        rel = np.array(_citation_times(g, n)) - b
        rows[g.nodes[n].external_id] = [int(np.sum(rel <= y)) for y in range(1, years + 1)]
    return pd.DataFrame.from_dict(rows, orient="index", columns=list(range(1, years + 1)))


def pearson_year_matrix(yearly):
    """
    Y x Y Pearson correlations between yearly columns across entities.
    Entries involving a zero-variance year are NaN (undefined).
    """
    df = pd.DataFrame(yearly)
    if df.shape[1] < 2:
        raise DataError("pearson_year_matrix needs at least two years")
    corr = df.astype(np.float64).corr(method="pearson")
    defined = df.std(ddof=0).to_numpy() > 0
    values = corr.to_numpy(copy=True)
    values[np.ix_(~defined, range(len(defined)))] = np.nan
    values[np.ix_(range(len(defined)), ~defined)] = np.nan
    values[np.diag_indices_from(values)] = np.where(defined, 1.0, np.nan)
    return pd.DataFrame(values, index=corr.index, columns=corr.columns)


def observed_share(g, kind, t_r=REFERENCE_TIME, t_p=PREDICTION_TIME):
    """
    Mean of c^{t_r} / c^{t_p} over entities followed for t_p years and cited
    by then; None when no entity qualifies.
    """
    ratios = []
    for n, b in sorted(_eligible(g, entity_births(g, kind), t_p).items()):
        rel = np.array(_citation_times(g, n)) - b
        final = int(np.sum(rel <= t_p))
        if final:
            ratios.append(np.sum(rel <= t_r) / final)
    return float(np.mean(ratios)) if ratios else None


def productivity_profile(g, years=DEFAULT_YEARS):
    """
    Per career year y = 1..years, averaged over authors:
    papers published, new citations received, and their product.
    """
    authors = entity_births(g, NodeKind.AUTHOR)
    papers = np.zeros(years)
    cites = np.zeros(years)
    for a, start in authors.items():
        for e in g.out_edges(a, EdgeKind.AUTHOR_WRITES_PAPER):
            y = int(np.floor(e.time - start))
            if 0 <= y < years:
                papers[y] += 1
        for t in _citation_times(g, a):
            y = int(np.floor(t - start))
            if 0 <= y < years:
                cites[y] += 1
    n = max(len(authors), 1)
    df = pd.DataFrame({
        "year": np.arange(1, years + 1),
        "mean_papers": papers / n,
        "mean_citations": cites / n,
    })
    df["product"] = df["mean_papers"] * df["mean_citations"]
    return df


def _clean(x):
    x = float(x)
    return x if np.isfinite(x) else None


def stats_report(g, years=DEFAULT_YEARS, obs=None):
    """Everything the `stats` stage writes, as plain JSON-ready objects."""
    obs = obs or ObservationConfig()
    report = {}
    for kind in (NodeKind.PAPER, NodeKind.AUTHOR):
        births = entity_births(g, kind)
        totals = [len(_citation_times(g, n)) for n in births]
        points = ccdf(totals) if totals else []
        yearly = yearly_citations(g, kind, years)
        entry = {
            "ccdf": [[x, p] for x, p in points],
            "tail_slope": tail_slope(points),
            "n_entities": len(births),
            "n_eligible": int(len(yearly)),
            "observed_share": observed_share(g, kind, obs.t_r, obs.t_p),
        }
        if len(yearly) >= 2:
            corr = pearson_year_matrix(yearly)
            entry["pearson"] = [[_clean(v) for v in row] for row in corr.to_numpy()]
        report[kind.label] = entry
    prof = productivity_profile(g, years)
    report["productivity"] = {c: [float(v) for v in prof[c]] for c in prof.columns}
    logger.info("stats: %d papers, %d authors profiled", report["paper"]["n_entities"],
                report["author"]["n_entities"])
    return report
