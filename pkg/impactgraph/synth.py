# impactgraph/synth.py
"""
Synthetic academic graph for desk-scale experiments.

- venues: lognormal quality, a topic vocabulary for titles
- authors: Pareto productivity, lognormal impact, an active career window
- papers: published uniformly over `years`; bylines drawn among active
  authors in proportion to productivity; Pareto fitness
- citations: every earlier paper is cited by a new paper with probability
  1 - exp(-intensity / papers_per_year), where
      intensity = citation_rate * fitness * sqrt(prestige) * (citations + 1)^pa * aging
  so a paper collects `intensity` citations per year until that saturates
- aging: a fast early-adoption component plus a slow component scaled by
  visibility; the first EARLY_RANKS citers raise visibility in proportion
  to their own prestige and less with every rank, so who cites early, and
  in which order, shapes the count after the observation window
- tail: final counts grow like fitness^(1 / (1 - pa)), so the fitness
  shape tail_exponent * (1 - pa)^-1 gives a CCDF slope of -tail_exponent
All seven edge kinds are emitted; derived citation edges follow authorship.
"""

import logging

import numpy as np
from tqdm import tqdm

from .errors import ConfigError
from .graph_store import EdgeKind, GraphBuilder, NodeKind, save_graph

logger = logging.getLogger(__name__)

FAST_DECAY = 1.0       # years, early-adoption window
SLOW_DECAY = 4.0       # years, sustained relevance
LONGEVITY = 0.08       # slow-component weight per unit of visibility
EARLY_RANKS = 5        # citations that can still raise visibility
CAREER_MEAN = 15.0
IMPACT_SPREAD = 0.5
CO_AUTHORS_MEAN = 1.5
SYLLABLES = ("ka", "lo", "mi", "ne", "ro", "ta", "vi", "su", "de", "qua", "phi", "tron")
GENERIC_WORDS = ("on", "the", "of", "a", "study", "model", "theory", "analysis")


def aging(age, visibility=1.0, longevity=LONGEVITY):
    """Citation attractiveness of a paper of the given age (years)."""
    return np.exp(-age / FAST_DECAY) + longevity * visibility * np.exp(-age / SLOW_DECAY)


def fitness_shape(scfg):
    """Pareto shape of paper fitness that puts the count CCDF at slope -tail_exponent."""
    return scfg.tail_exponent / (1.0 - scfg.pa_exponent)


def check_feasible(scfg):
    if scfg.n_papers == 0:
        return
    if scfg.n_authors == 0 or scfg.n_venues == 0:
        raise ConfigError("synth: papers need at least one author and one venue")
    if scfg.n_authors * scfg.max_papers_per_author < scfg.n_papers:
        raise ConfigError(
            f"synth: {scfg.n_papers} papers exceed author capacity "
            f"({scfg.n_authors} authors x {scfg.max_papers_per_author} papers)"
        )


def _topic_words(rng, n_words=8):
    return [
        "".join(rng.choice(SYLLABLES, size=rng.integers(2, 4)))
        for _ in range(n_words)
    ]


def _byline(rng, t, n_authors, start, end, productivity, load, spare, scfg):
    """spare: author slots that can go to this paper without starving later papers."""
    size = min(1 + rng.poisson(CO_AUTHORS_MEAN), scfg.max_authors_per_paper, n_authors, spare)
    open_slots = load < scfg.max_papers_per_author
    active = open_slots & (start <= t) & (t <= end)
    pool = active if active.sum() >= size else open_slots
    if pool.sum() < size:
        size = int(pool.sum())
    w = np.where(pool, productivity, 0.0)
    return rng.choice(n_authors, size=size, replace=False, p=w / w.sum())


def generate(scfg, progress=False):
    """Build the synthetic HeteroGraph (deterministic in scfg.seed)."""
    check_feasible(scfg)
    rng = np.random.default_rng(scfg.seed)
    n_p, n_a, n_v = scfg.n_papers, scfg.n_authors, scfg.n_venues

    quality = rng.lognormal(0.0, scfg.venue_quality_spread, size=n_v)
    topics = [_topic_words(rng) for _ in range(n_v)]
    productivity = rng.pareto(scfg.productivity_shape, size=n_a) + 1.0
    impact = rng.lognormal(0.0, IMPACT_SPREAD, size=n_a)
    start = rng.uniform(-5.0, scfg.years, size=n_a)
    end = start + rng.exponential(CAREER_MEAN, size=n_a)

    births = np.sort(rng.uniform(0.0, scfg.years, size=n_p))
    fitness = rng.pareto(fitness_shape(scfg), size=n_p) + 1.0
    venue = rng.choice(n_v, size=n_p, p=quality / quality.sum()) if n_p else np.zeros(0, dtype=int)
    per_year = n_p / scfg.years
    cites = np.zeros(n_p)
    visibility = np.ones(n_p)
    prestige = np.ones(n_p)
    load = np.zeros(n_a, dtype=np.int64)

    bylines, references = [], []
    for i in tqdm(range(n_p), desc="Generating papers", disable=not progress):
        t = births[i]
        spare = n_a * scfg.max_papers_per_author - int(load.sum()) - (n_p - i - 1)
        authors = _byline(rng, t, n_a, start, end, productivity, load, spare, scfg)
        load[authors] += 1
        bylines.append(authors)
        prestige[i] = impact[authors].mean() * quality[venue[i]]

        refs = np.zeros(0, dtype=np.int64)
        if i > 0:
            intensity = (scfg.citation_rate * fitness[:i] * np.sqrt(prestige[:i])
                         * (cites[:i] + 1.0) ** scfg.pa_exponent * aging(t - births[:i], visibility[:i]))
            refs = np.flatnonzero(rng.random(i) < -np.expm1(-intensity / per_year))
        early = refs[cites[refs] < EARLY_RANKS]
        visibility[early] += scfg.burst * prestige[i] / (1.0 + cites[early])
        cites[refs] += 1
        references.append(refs)

    return _assemble(scfg, births, venue, bylines, references, start, topics, rng)


def _assemble(scfg, births, venue, bylines, references, start, topics, rng):
    n_p, n_a, n_v = scfg.n_papers, scfg.n_authors, scfg.n_venues
    first_paper = np.full(n_a, np.inf)
    for i, authors in enumerate(bylines):
        first_paper[authors] = np.minimum(first_paper[authors], births[i])
    author_birth = np.where(np.isfinite(first_paper), first_paper, np.clip(start, 0.0, scfg.years))

    pid = lambda i: f"p{i:05d}"  # noqa: E731
    aid = lambda a: f"a{a:04d}"  # noqa: E731
    vid = lambda v: f"v{v:02d}"  # noqa: E731

    b = GraphBuilder()
    for v in range(n_v):
        b.add_node(vid(v), NodeKind.VENUE, 0.0)
    for a in range(n_a):
        b.add_node(aid(a), NodeKind.AUTHOR, float(author_birth[a]))
    for i in range(n_p):
        words = list(rng.choice(topics[venue[i]], size=5)) + list(rng.choice(GENERIC_WORDS, size=2))
        b.add_node(pid(i), NodeKind.PAPER, float(births[i]), title=" ".join(words))

    for i in range(n_p):
        t = float(births[i])
        authors = bylines[i]
        b.add_edge(pid(i), vid(venue[i]), EdgeKind.PAPER_PUBLISHED_IN_VENUE, time=t)
        for a in authors:
            b.add_edge(aid(a), pid(i), EdgeKind.AUTHOR_WRITES_PAPER, time=t)
            b.add_edge(aid(a), vid(venue[i]), EdgeKind.AUTHOR_PUBLISHES_VENUE, time=t)
            for other in authors:
                if other != a:
                    b.add_edge(aid(a), aid(other), EdgeKind.AUTHOR_COLLAB_AUTHOR, time=t)
        for j in references[i]:
            b.add_edge(pid(i), pid(j), EdgeKind.PAPER_CITES_PAPER, time=t)
            for a in bylines[j]:
                b.add_edge(pid(i), aid(a), EdgeKind.PAPER_CITES_AUTHOR, time=t)
            for a in authors:
                b.add_edge(aid(a), pid(j), EdgeKind.AUTHOR_CITES_PAPER, time=t)

    g = b.finalize()
    logger.info("synthetic graph: %d papers, %d authors, %d venues, %d edges", n_p, n_a, n_v, g.num_edges)
    return g


def generate_synthetic(scfg, nodes_path, edges_path, progress=False):
    """Generate and write nodes.jsonl + edges.jsonl; returns the graph."""
    g = generate(scfg, progress=progress)
    save_graph(g, nodes_path, edges_path)
    return g
