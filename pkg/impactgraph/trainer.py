# impactgraph/trainer.py
"""
End-to-end training of an ImpactModel on a CascadeDataset:
  - batches group cascades of similar length; batch order is reshuffled
    every epoch from the optimizer seed
  - early stopping on validation loss (patience epochs), best parameters kept
  - optional learning-rate grid search, one fresh model per rate
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from . import autodiff as ad
from .errors import DataError, NumericError

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    lr: float
    best_val: float
    best_epoch: int
    history: list = field(default_factory=list)


def make_batches(cascades, batch_size, rng=None):
    """Index batches of length-sorted cascades; chunk order shuffled when rng is given."""
    order = sorted(range(len(cascades)), key=lambda i: (len(cascades[i].events), i))
    chunks = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if rng is not None:
        chunks = [chunks[i] for i in rng.permutation(len(chunks))]
    return chunks


def _require(cascades, name):
    if not cascades:
        raise DataError(f"the {name} split is empty")
    return cascades


def mean_loss(model, cascades, batch_size):
    """Sample-weighted mean loss without recording gradients."""
    total = 0.0
    for chunk in make_batches(cascades, batch_size):
        batch = [cascades[i] for i in chunk]
        total += model.loss(batch).item() * len(batch)
    return total / len(cascades)


def predict_all(model, cascades, batch_size=64):
    """Predicted counts in the order of `cascades`."""
    out = np.zeros(len(cascades))
    for chunk in make_batches(cascades, batch_size):
        out[chunk] = model.predict([cascades[i] for i in chunk])
    return out


def _step(store, opt, lr):
    if opt.name == "sgd":
        ad.sgd_step(store, lr)
    else:
        ad.adam_step(store, lr, opt.beta1, opt.beta2, opt.eps)


def train(model, dataset, opt, lr=None, progress=True):
    """
    Fit `model` on the train split; returns a TrainResult and leaves the
    best-validation parameters loaded in model.store.
    """
    lr = opt.lr if lr is None else lr
    train_set = _require(dataset.split("train"), "train")
    val_set = _require(dataset.split("val"), "validation")
    store = model.store
    model.cascade.init_output_bias(np.mean(np.log2([c.label for c in train_set])))

    rng = np.random.default_rng(opt.seed)
    result = TrainResult(lr=lr, best_val=float("inf"), best_epoch=0)
    best_params = store.snapshot()
    wait = 0

    for epoch in range(1, opt.max_epochs + 1):
        total = 0.0
        batches = make_batches(train_set, opt.batch_size, rng)
        for chunk in tqdm(batches, desc=f"Epoch {epoch}", leave=False, disable=not progress):
            batch = [train_set[i] for i in chunk]
            store.zero_grad()
            with ad.Tape() as tape:
                loss = model.loss(batch)
            grads = ad.backward(tape, loss, store)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"training loss became non-finite at epoch {epoch} (lr={lr:g})")
            bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
            if bad:
                raise NumericError(f"non-finite gradient for {bad[0]} at epoch {epoch} (lr={lr:g})")
            _step(store, opt, lr)
            total += value * len(batch)

        train_loss = total / len(train_set)
        val_loss = mean_loss(model, val_set, opt.batch_size)
        if not np.isfinite(val_loss):
            raise NumericError(f"validation loss became non-finite at epoch {epoch} (lr={lr:g})")
        result.history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        logger.info("epoch %d: train %.5f  val %.5f", epoch, train_loss, val_loss)

        if val_loss < result.best_val:
            result.best_val, result.best_epoch = val_loss, epoch
            best_params = store.snapshot()
            wait = 0
        else:
            wait += 1
            if wait >= opt.patience:
                logger.info("early stop at epoch %d (best %d)", epoch, result.best_epoch)
                break

    store.load(best_params)
    return result


def lr_search(build_model, dataset, opt, progress=True):
    """
    Train one fresh model per learning rate in opt.lr_grid, sequentially.
    A rate that diverges is recorded with best_val = inf.
    Returns (best model, best TrainResult, all results).
    """
    best_model, best, results = None, None, []
    for lr in opt.lr_grid:
        model = build_model()
        try:
            res = train(model, dataset, dataclasses.replace(opt, lr=lr), progress=progress)
        except NumericError as e:
            logger.warning("lr %g diverged: %s", lr, e)
            res = TrainResult(lr=lr, best_val=float("inf"), best_epoch=0)
        results.append(res)
        if best is None or res.best_val < best.best_val:
            best_model, best = model, res
    if best is None or not np.isfinite(best.best_val):
        raise NumericError("every learning rate in the grid diverged")
    return best_model, best, results


def history_json(result, search=None):
    obj = {
        "lr": result.lr,
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val,
        "epochs": result.history,
    }
    if search is not None:
        obj["lr_search"] = [
            {"lr": r.lr, "best_val_loss": r.best_val if np.isfinite(r.best_val) else None, "best_epoch": r.best_epoch}
            for r in search
        ]
    return json.dumps(obj, indent=2, sort_keys=True)
