"""Scikit-learn estimator facade over the forest fitting pipeline."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ConfigurationError
from .forest import fit_forest, forest_apply, forest_predict_batch
from .nlar import Dataset
from .tree_builder import EXTRATREES, BuildConfig

__all__ = ["NLARForestRegressor"]


class NLARForestRegressor(BaseEstimator, RegressorMixin):
    """Random-forest regressor with minimum-leaf-size and balance guarantees.

    Fits ``B`` trees on the full sample (no bootstrap); every leaf of every
    tree holds at least ``k`` points, each split leaves at least an
    ``alpha`` fraction of its parent's points on both sides, and nodes with
    at least ``m`` points (default ``2 * k``) keep being split. Designed
    for lagged time-series design matrices but accepts any (X, y).

    Parameters
    ----------
    B : int, default=500
        Number of trees.
    k : int or "auto", default="auto"
        Minimum leaf size. "auto" uses the slowly growing schedule
        ``floor(0.04 * ln(T)^4 * ln(ln(T)))`` in the sample size T.
    m : int or None, default=None
        Split-forcing size; None means ``2 * k``.
    alpha : float, default=0.1
        Balance fraction, in (0, 1/2).
    rho : sequence of float or None, default=None
        Per-axis split-direction probabilities (must be positive and sum
        to 1); None means uniform.
    split_rule : {"extratrees", "variance_reduction"}, default="extratrees"
        Randomized thresholds, or exhaustive within-child variance scan.
    random_state : int, default=0
        Master seed; per-tree streams are derived from it.
    """

    def __init__(self, B=500, k="auto", m=None, alpha=0.1, rho=None,
                 split_rule=EXTRATREES, random_state=0):
        self.B = B
        self.k = k
        self.m = m
        self.alpha = alpha
        self.rho = rho
        self.split_rule = split_rule
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if self.k == "auto":
            from .experiments import k_schedule

            k = k_schedule(X.shape[0])
        else:
            k = int(self.k)
        if k < 1:
            raise ConfigurationError(f"k must be positive, got {k}")
        data = Dataset(X, y, p=X.shape[1])
        config = BuildConfig(
            k=k, m=self.m, alpha=self.alpha,
            rho=tuple(self.rho) if self.rho is not None else None,
            split_rule=self.split_rule,
        )
        seed = 0 if self.random_state is None else int(self.random_state)
        self.forest_ = fit_forest(data, config, self.B, seed)
        self.k_ = k
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, n_jobs=1):
        check_is_fitted(self, "forest_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return forest_predict_batch(self.forest_, X, n_jobs=n_jobs)

    def apply(self, X):
        """Leaf ids per sample and tree, shape (n_samples, B)."""
        check_is_fitted(self, "forest_")
        X = check_array(X, dtype=np.float64)
        return forest_apply(self.forest_, X)
