# impactgraph/experiment.py
"""
Multi-seed comparison of model variants with the baselines, one dataset per
task. Every variant is trained once per seed on the same splits; the
baselines are deterministic and fitted once. The report carries the median
test MSLE of every entry and these orderings, each with a pass/fail line:
  - full beats Uniform and Feature-c^{t_r}
  - max pooling does not beat full
  - the author task scores a higher MSLE than the paper task
"""

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .baselines import feature_baseline, uniform_baseline
from .errors import DataError
from .metrics import evaluate
from .trainer import predict_all, train

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = 5
DEFAULT_VARIANTS = ("full", "maxp")
BASELINE_NAMES = {"uniform": "Uniform", "feature_ctr": "Feature-c^{t_r}"}


@dataclass
class TaskResult:
    task: str
    n_test: int
    baselines: dict = field(default_factory=dict)   # name -> test MSLE
    runs: dict = field(default_factory=dict)        # variant -> [test MSLE per seed]

    def median(self, variant):
        return float(np.median(self.runs[variant]))

    def to_dict(self):
        return {
            "n_test": self.n_test,
            "baselines": dict(self.baselines),
            "runs": {v: list(s) for v, s in self.runs.items()},
            "median": {v: self.median(v) for v in self.runs},
        }


def run_task(task, dataset, build_model, opt, seeds, variants=DEFAULT_VARIANTS, progress=False):
    """
    build_model(variant, seed) -> fresh ImpactModel.
    Each seed also drives the batch order of its training run.
    """
    train_set, test = dataset.split("train"), dataset.split("test")
    if not train_set or not test:
        raise DataError(f"{task} task needs non-empty train and test splits")
    labels = [c.label for c in test]
    result = TaskResult(task, len(test))
    _, uniform = uniform_baseline([c.label for c in train_set], labels)
    _, ctr = feature_baseline(train_set, test, "c_tr_only")
    result.baselines = {"uniform": uniform.msle, "feature_ctr": ctr.msle}

    for variant in variants:
        scores = []
        for seed in seeds:
            model = build_model(variant, seed)
            fit = train(model, dataset, dataclasses.replace(opt, seed=seed), progress=progress)
            score = evaluate(predict_all(model, test), labels).msle
            logger.info("%s/%s seed %d: test MSLE %.4f (best epoch %d)", task, variant, seed, score, fit.best_epoch)
            scores.append(score)
        result.runs[variant] = scores
    return result


def _check(name, passed, detail):
    return {"check": name, "passed": bool(passed), "detail": detail}


def ordering_checks(results):
    """results: task -> TaskResult. Only orderings whose inputs were run are checked."""
    checks = []
    for task, r in results.items():
        if "full" not in r.runs:
            continue
        full = r.median("full")
        for key, label in BASELINE_NAMES.items():
            base = r.baselines[key]
            checks.append(_check(f"{task}: full < {label}", full < base, f"{full:.4f} vs {base:.4f}"))
        if "maxp" in r.runs:
            maxp = r.median("maxp")
            checks.append(_check(f"{task}: maxp >= full", maxp >= full, f"{maxp:.4f} vs {full:.4f}"))
    if all(t in results and "full" in results[t].runs for t in ("paper", "author")):
        author, paper = results["author"].median("full"), results["paper"].median("full")
        checks.append(_check("author full > paper full", author > paper, f"{author:.4f} vs {paper:.4f}"))
    return checks


def experiment_report(results, seeds):
    checks = ordering_checks(results)
    return {
        "seeds": list(seeds),
        "tasks": {task: r.to_dict() for task, r in results.items()},
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
    }
