# impactgraph/cli.py
"""
Pipeline controller: python -m impactgraph <stage> [options]

  synth     generate nodes.jsonl + edges.jsonl
  ingest    validate a graph, write its summary
  sample    weighted random-walk neighbor sets -> neighbor_sets.bin
  pretrain  skip-gram warm start of the encoder -> embeddings.bin
  train     fit a model variant (optionally over the lr grid)
  eval      score a trained variant or a baseline on the test split
  predict   predictions.csv for a trained variant
  stats     CCDF / Pearson / productivity statistics
  experiment  multi-seed variants vs baselines, with ordering checks

Exit codes: 1 config error, 2 data error, 3 numeric failure.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import autodiff as ad
from .analytics import stats_report
from .baselines import feature_baseline, uniform_baseline
from .cascade_model import ImpactModel
from .config import (
    DATASET_FILE, EDGES_FILE, EMBEDDINGS_FILE, EXPERIMENT_FILE, HISTORY_FILE, MODEL_CHECKPOINT_FILE,
    NEIGHBOR_SETS_DEBUG_FILE, NEIGHBOR_SETS_FILE, NEIGHBOR_SETS_META_FILE, NODES_FILE, PREDICTIONS_FILE,
    PRETRAIN_CHECKPOINT_FILE, REPORT_FILE, STATS_FILE, SUMMARY_FILE, VARIANTS,
    load_run_config, thread_count,
)
from .dataset import build_dataset, dataset_summary, save_dataset
from .encoder import (
    NodeEncoder, build_content_table, encode_all, load_embeddings, pretrain, save_embeddings,
)
from .experiment import DEFAULT_SEEDS, DEFAULT_VARIANTS, experiment_report, run_task
from .errors import DataError, ImpactGraphError, NumericError
from .graph_store import load_graph, summary
from .hetero_sampler import (
    generate_walks, load_neighbor_sets, sample_all, save_neighbor_sets, save_neighbor_sets_jsonl,
)
from .metrics import evaluate, predictions_frame, save_predictions, save_report, venue_keys
from .synth import generate_synthetic
from .trainer import history_json, lr_search, predict_all, train

logger = logging.getLogger("impactgraph")

BASELINES = {"uniform": None, "feature_ctr": "c_tr_only", "feature": "full"}


# ----------------------------------
# Shared helpers
# ----------------------------------
def _write_json(obj, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _graph_paths(cfg, args):
    """--nodes/--edges, else a pair already in the output dir, else [paths]."""
    out = cfg.paths.out
    nodes = args.nodes or (os.path.join(out, NODES_FILE) if os.path.exists(os.path.join(out, NODES_FILE))
                           else cfg.paths.nodes)
    edges = args.edges or (os.path.join(out, EDGES_FILE) if os.path.exists(os.path.join(out, EDGES_FILE))
                           else cfg.paths.edges)
    return nodes, edges


def _load_graph(cfg, args):
    nodes, edges = _graph_paths(cfg, args)
    return load_graph(nodes, edges, epoch=cfg.epoch_year)


def _walk_meta(cfg, g):
    """Settings a neighbor_sets.bin was sampled with (JSON-normalized for comparison)."""
    return json.loads(json.dumps({"walk": dataclasses.asdict(cfg.walk), "n_nodes": g.num_nodes}))


def _save_neighbors(cfg, g, table):
    path = os.path.join(cfg.paths.out, NEIGHBOR_SETS_FILE)
    save_neighbor_sets(table, path)
    _write_json(_walk_meta(cfg, g), os.path.join(cfg.paths.out, NEIGHBOR_SETS_META_FILE))
    print(f" Saved {path}")


def _neighbors(cfg, g, progress):
    """
    Reuse neighbor_sets.bin from the output dir when it was sampled with the
    current [walk] settings and seed; sample (and overwrite) it otherwise.
    """
    path = os.path.join(cfg.paths.out, NEIGHBOR_SETS_FILE)
    meta_path = os.path.join(cfg.paths.out, NEIGHBOR_SETS_META_FILE)
    if os.path.exists(path) and os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
        if meta == _walk_meta(cfg, g):
            return load_neighbor_sets(path, cfg.walk.samples_per_type)
        logger.info("walk settings differ from %s; resampling neighbor sets", meta_path)
    table = sample_all(g, cfg.walk, n_jobs=thread_count(), progress=progress)
    _save_neighbors(cfg, g, table)
    return table


def _run_dir(cfg, task, name):
    path = os.path.join(cfg.paths.out, f"{task}_{name}")
    os.makedirs(path, exist_ok=True)
    return path


def _dataset(cfg, g, task, progress):
    ds = build_dataset(g, task, cfg.observation, progress=progress)
    path = os.path.join(cfg.paths.out, f"{task}_{DATASET_FILE}")
    save_dataset(g, ds, path)
    info = dataset_summary(ds)
    print(f" {task} dataset: {info['n']} cascades {info['splits']}")
    return ds


def _read_checkpoint(path):
    if not os.path.exists(path):
        raise DataError(f"checkpoint not found: {path} (run `train` first)")
    try:
        return ad.read_checkpoint(path)
    except ValueError as e:
        raise DataError(str(e)) from None


def _model_factory(cfg, g, neighbors, variant):
    """Builds fresh models for a variant, warm-started from pretrain.ck when present."""
    model_cfg = cfg.model.variant(variant)
    embeddings = None
    if not cfg.encoder.finetune:
        path = os.path.join(cfg.paths.out, EMBEDDINGS_FILE)
        if not os.path.exists(path):
            raise DataError(f"encoder.finetune is off but {path} is missing (run `pretrain` first)")
        embeddings = load_embeddings(path)
    warm = os.path.join(cfg.paths.out, PRETRAIN_CHECKPOINT_FILE)
    warm_params = _read_checkpoint(warm) if os.path.exists(warm) else None

    def build(seed=None):
        model = ImpactModel(g, neighbors, cfg.encoder, model_cfg, embeddings=embeddings, seed=seed)
        if warm_params is not None:
            model.store.load(warm_params)
        return model

    return build


def _trained_model(cfg, g, neighbors, task, variant):
    model = _model_factory(cfg, g, neighbors, variant)()
    model.store.load(_read_checkpoint(os.path.join(_run_dir(cfg, task, variant), MODEL_CHECKPOINT_FILE)))
    return model


# ----------------------------------
# Stages
# ----------------------------------
def cmd_synth(cfg, args, progress):
    out = cfg.paths.out
    g = generate_synthetic(cfg.synth, os.path.join(out, NODES_FILE), os.path.join(out, EDGES_FILE), progress)
    print(f" Generated {g.num_nodes} nodes and {g.num_edges} edges")
    print(f" Saved {os.path.join(out, NODES_FILE)}")
    print(f" Saved {os.path.join(out, EDGES_FILE)}")


def cmd_ingest(cfg, args, progress):
    g = _load_graph(cfg, args)
    info = summary(g)
    path = os.path.join(cfg.paths.out, SUMMARY_FILE)
    _write_json(info, path)
    print(f" Graph OK: {info['n_nodes']} nodes, {info['n_edges']} edges, horizon {info['horizon']:g}")
    print(f" Saved {path}")


def cmd_sample(cfg, args, progress):
    g = _load_graph(cfg, args)
    table = sample_all(g, cfg.walk, n_jobs=thread_count(), progress=progress)
    _save_neighbors(cfg, g, table)
    if args.debug_jsonl:
        debug = os.path.join(cfg.paths.out, NEIGHBOR_SETS_DEBUG_FILE)
        save_neighbor_sets_jsonl(table, g, debug)
        print(f" Saved {debug}")


def cmd_pretrain(cfg, args, progress):
    g = _load_graph(cfg, args)
    neighbors = _neighbors(cfg, g, progress)
    store = ad.ParameterStore(cfg.encoder.seed)
    content = build_content_table(g, cfg.encoder.title_hash_dim, degree_window=cfg.encoder.degree_window)
    encoder = NodeEncoder(store, content, cfg.encoder)
    if cfg.encoder.pretrain_epochs > 0:
        walks = generate_walks(g, cfg.walk)
        losses = pretrain(g, walks, encoder, neighbors, cfg.encoder, progress=progress)
        print(f" Skip-gram loss: {losses[0]:.4f} -> {losses[-1]:.4f}")
    ck = os.path.join(cfg.paths.out, PRETRAIN_CHECKPOINT_FILE)
    ad.save_checkpoint(store, ck)
    emb = os.path.join(cfg.paths.out, EMBEDDINGS_FILE)
    save_embeddings(encode_all(encoder, neighbors, progress=progress), emb)
    print(f" Saved {ck}")
    print(f" Saved {emb}")


def cmd_train(cfg, args, progress):
    g = _load_graph(cfg, args)
    neighbors = _neighbors(cfg, g, progress)
    ds = _dataset(cfg, g, args.task, progress)
    build = _model_factory(cfg, g, neighbors, args.variant)

    if args.lr_search:
        model, result, search = lr_search(build, ds, cfg.optimizer, progress=progress)
    else:
        model, search = build(), None
        result = train(model, ds, cfg.optimizer, progress=progress)

    run = _run_dir(cfg, args.task, args.variant)
    ck = os.path.join(run, MODEL_CHECKPOINT_FILE)
    ad.save_checkpoint(model.store, ck)
    hist = os.path.join(run, HISTORY_FILE)
    with open(hist, "w", encoding="utf-8", newline="\n") as f:
        f.write(history_json(result, search) + "\n")
    print(f" Best validation loss {result.best_val:.5f} at epoch {result.best_epoch} (lr={result.lr:g})")
    print(f" Saved {ck}")
    print(f" Saved {hist}")


def cmd_eval(cfg, args, progress):
    g = _load_graph(cfg, args)
    ds = _dataset(cfg, g, args.task, progress)
    test = ds.split(args.split)
    if not test:
        raise DataError(f"the {args.split} split is empty")
    labels = [c.label for c in test]
    venues = venue_keys(g, test)

    if args.baseline:
        train_set = ds.split("train")
        if args.baseline == "uniform":
            const, report = uniform_baseline([c.label for c in train_set], labels, venues)
            print(f" Uniform constant: log2 c = {const:.3f}")
        else:
            _, report = feature_baseline(train_set, test, BASELINES[args.baseline], venues)
        run = _run_dir(cfg, args.task, args.baseline)
    else:
        neighbors = _neighbors(cfg, g, progress)
        model = _trained_model(cfg, g, neighbors, args.task, args.variant)
        report = evaluate(predict_all(model, test), labels, venues)
        run = _run_dir(cfg, args.task, args.variant)

    path = os.path.join(run, REPORT_FILE)
    save_report(report, path)
    print(f" MSLE {report.msle:.4f}  ACC {report.acc:.2%}  (n={report.n})")
    print(f" Saved {path}")


def cmd_predict(cfg, args, progress):
    g = _load_graph(cfg, args)
    neighbors = _neighbors(cfg, g, progress)
    ds = _dataset(cfg, g, args.task, progress)
    cascades = [s.cascade for s in ds.samples] if args.split == "all" else ds.split(args.split)
    model = _trained_model(cfg, g, neighbors, args.task, args.variant)
    df = predictions_frame(g, cascades, predict_all(model, cascades))
    path = os.path.join(_run_dir(cfg, args.task, args.variant), PREDICTIONS_FILE)
    save_predictions(df, path)
    print(f" Saved {len(df)} predictions to {path}")


def cmd_stats(cfg, args, progress):
    g = _load_graph(cfg, args)
    report = stats_report(g, years=args.years, obs=cfg.observation)
    path = os.path.join(cfg.paths.out, STATS_FILE)
    _write_json(report, path)
    slope = report["paper"]["tail_slope"]
    if slope is not None:
        print(f" Paper citation CCDF tail slope: {slope:.3f}")
    for kind in ("paper", "author"):
        share = report[kind]["observed_share"]
        if share is not None:
            print(f" {kind.title()} citations seen by t_r: {share:.1%} of the t_p count")
    print(f" Saved {path}")


def cmd_experiment(cfg, args, progress):
    g = _load_graph(cfg, args)
    neighbors = _neighbors(cfg, g, progress)
    factories = {v: _model_factory(cfg, g, neighbors, v) for v in args.variants}
    seeds = list(range(cfg.seed, cfg.seed + args.seeds))
    results = {}
    for task in args.tasks:
        ds = _dataset(cfg, g, task, progress)
        results[task] = run_task(task, ds, lambda v, s: factories[v](s), cfg.optimizer, seeds, args.variants,
                                 progress=progress)
        med = ", ".join(f"{v} {results[task].median(v):.4f}" for v in args.variants)
        base = ", ".join(f"{k} {m:.4f}" for k, m in results[task].baselines.items())
        print(f" {task}: median MSLE {med} | {base}")
    report = experiment_report(results, seeds)
    for c in report["checks"]:
        print(f" {'PASS' if c['passed'] else 'FAIL'} {c['check']} ({c['detail']})")
    path = os.path.join(cfg.paths.out, EXPERIMENT_FILE)
    _write_json(report, path)
    print(f" Saved {path}")


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "sample": cmd_sample,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "stats": cmd_stats,
    "experiment": cmd_experiment,
}


# ----------------------------------
# Argument parsing
# ----------------------------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the run seed (feeds every RNG)")
    common.add_argument("--out", help="output directory (overrides [paths] out)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="no progress bars, warnings only")

    graph = argparse.ArgumentParser(add_help=False)
    graph.add_argument("--nodes", help="nodes.jsonl (default: output dir, then [paths] nodes)")
    graph.add_argument("--edges", help="edges.jsonl (default: output dir, then [paths] edges)")

    task = argparse.ArgumentParser(add_help=False)
    task.add_argument("--task", choices=("paper", "author"), default="paper", help="prediction target")
    task.add_argument("--variant", choices=sorted(VARIANTS), default="full", help="model variant")

    parser = argparse.ArgumentParser(
        prog="impactgraph",
        description="Citation-impact prediction on heterogeneous academic graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate a synthetic academic graph")
    sub.add_parser("ingest", parents=[common, graph], help="validate a graph and summarize it")
    p = sub.add_parser("sample", parents=[common, graph], help="sample neighbor sets")
    p.add_argument("--debug-jsonl", action="store_true", help="also write neighbor_sets.jsonl")
    sub.add_parser("pretrain", parents=[common, graph], help="skip-gram warm start, write embeddings.bin")
    p = sub.add_parser("train", parents=[common, graph, task], help="train a model variant")
    p.add_argument("--lr-search", action="store_true", help="run the learning-rate grid, keep the best")
    p = sub.add_parser("eval", parents=[common, graph, task], help="score a model or baseline")
    p.add_argument("--baseline", choices=sorted(BASELINES), help="evaluate a baseline instead of a model")
    p.add_argument("--split", choices=("train", "val", "test"), default="test", help="split to score")
    p = sub.add_parser("predict", parents=[common, graph, task], help="write predictions.csv")
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test", help="split to predict")
    p = sub.add_parser("stats", parents=[common, graph], help="citation statistics")
    p.add_argument("--years", type=int, default=10, help="years of cumulative citations")
    p = sub.add_parser("experiment", parents=[common, graph], help="multi-seed variants vs baselines")
    p.add_argument("--tasks", nargs="+", choices=("paper", "author"), default=["paper", "author"], help="tasks to run")
    p.add_argument("--variants", nargs="+", choices=sorted(VARIANTS), default=list(DEFAULT_VARIANTS),
                   help="model variants to train per seed")
    p.add_argument("--seeds", type=int, default=DEFAULT_SEEDS, help="training seeds, counted up from the run seed")
    return parser


def _configure_logging(verbose, quiet):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    progress = not args.quiet and sys.stderr.isatty()
    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.out:
            cfg = cfg.with_out(os.path.abspath(args.out))
        os.makedirs(cfg.paths.out, exist_ok=True)
        COMMANDS[args.command](cfg, args, progress)
    except ImpactGraphError as e:
        print(f" {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f" numeric failure: {e}", file=sys.stderr)
        return NumericError.exit_code
    return 0
