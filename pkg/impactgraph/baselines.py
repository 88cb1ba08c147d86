# impactgraph/baselines.py
"""
Reference predictors for the citation-count tasks:
  - Uniform: one constant log2 prediction, grid-searched on the train labels
  - Feature: least squares on log2 labels from observation-window features
      c_tr_only -> log2 observed citations
      full      -> + mean event time, log in/out degree of the target
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LinearRegression, Ridge

from .errors import DataError, NumericError
from .metrics import evaluate

logger = logging.getLogger(__name__)

GRID_STEP = 0.001
RIDGE = 1e-8
FEATURE_MODES = ("c_tr_only", "full")


# ----------------------------------
# Uniform
# ----------------------------------
def uniform_constant(train_labels, step=GRID_STEP):
    """Grid point in [min, max] of log2 labels (step 0.001) minimizing train MSLE."""
    y = np.log2(np.asarray(train_labels, dtype=np.float64))
    if y.size == 0:
        raise DataError("uniform baseline needs training labels")
    lo, hi = float(y.min()), float(y.max())
    grid = lo + step * np.arange(int(np.floor((hi - lo) / step)) + 1)
    if grid[-1] < hi:
        grid = np.append(grid, hi)
    # mean((g - y)^2) = (g - mean)^2 + var
    loss = (grid - y.mean()) ** 2 + y.var()
    return float(grid[int(np.argmin(loss))])


def uniform_baseline(train_labels, eval_labels, venues=None):
    """Returns (constant log2 prediction, EvalReport on eval_labels)."""
    const = uniform_constant(train_labels)
    preds = np.full(len(eval_labels), 2.0 ** const)
    return const, evaluate(preds, eval_labels, venues)


# ----------------------------------
# Feature regression
# ----------------------------------
def feature_matrix(cascades, mode):
    if mode not in FEATURE_MODES:
        raise DataError(f"unknown feature mode {mode!r}; expected one of {FEATURE_MODES}")
    rows = []
    for c in cascades:
        row = [np.log2(max(c.observed, 1))]
        if mode == "full":
            f = c.features
            row += [float(f.get("mean_time", 0.0)),
                    np.log1p(f.get("in_degree", 0)), np.log1p(f.get("out_degree", 0))]
        rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(len(cascades), 1 if mode == "c_tr_only" else 4)


@dataclass
class FeatureModel:
    mode: str
    coef: np.ndarray
    intercept: float

    def predict_log2(self, cascades):
        return feature_matrix(cascades, self.mode) @ self.coef + self.intercept

    def predict(self, cascades):
        return np.exp2(self.predict_log2(cascades))


def fit_least_squares(X, y):
    """
    Ordinary least squares with an intercept. A design that is rank-deficient
    after centering falls back to ridge 1e-8 via the normal equations.
    Returns (coef, intercept).
    """
    centered = X - X.mean(axis=0)
    if X.shape[0] > X.shape[1] and np.linalg.matrix_rank(centered) == X.shape[1]:
        reg = LinearRegression().fit(X, y)
    else:
        reg = Ridge(alpha=RIDGE, solver="cholesky").fit(X, y)
    coef, intercept = np.asarray(reg.coef_, dtype=np.float64), float(reg.intercept_)
    if not (np.all(np.isfinite(coef)) and np.isfinite(intercept)):
        raise NumericError("feature regression produced non-finite coefficients")
    return coef, intercept


def fit_feature_model(train, mode):
    if not train:
        raise DataError("feature baseline needs training samples")
    X = feature_matrix(train, mode)
    y = np.log2([c.label for c in train])
    coef, intercept = fit_least_squares(X, y)
    logger.info("feature baseline (%s): coef=%s intercept=%.4f", mode, np.round(coef, 4).tolist(), intercept)
    return FeatureModel(mode, coef, intercept)


def feature_baseline(train, eval_set, mode, venues=None):
    """Returns (FeatureModel, EvalReport on eval_set)."""
    model = fit_feature_model(train, mode)
    return model, evaluate(model.predict(eval_set), [c.label for c in eval_set], venues)
