"""scikit-learn style wrappers around :func:`~fbipg.solver.run_fbipg`.

Both estimators solve a bi-level problem whose inner objective is the data
fit and whose outer objective is ``l1_weight * ||w||_1``: among all
minimizers of the loss they look for the one with the smallest l1 norm.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import functions as fn
from .problem import BilevelProblem
from .solver import FBiPGConfig, run_fbipg

__all__ = ["FBiPGRegressor", "FBiPGLogisticClassifier"]


class _FBiPGMixin:
    def _config(self):
        return FBiPGConfig(gamma=self.gamma, a=self.a, t_mode=self.t_mode,
                           iters=self.max_iter, trace_stride=self.trace_every)

    def _solve(self, inner, n):
        problem = BilevelProblem(inner, fn.Zero(n), fn.Zero(n), fn.L1(self.l1_weight),
                                 inner.lipschitz if inner.lipschitz > 0 else 1.0, n,
                                 omega_star=0.0)
        trace = run_fbipg(problem, self._config())
        self.coef_ = trace.x_final.copy()
        self.trace_ = trace
        self.n_iter_ = self.max_iter
        self.n_features_in_ = n
        return self


class FBiPGRegressor(_FBiPGMixin, RegressorMixin, BaseEstimator):
    """Minimum-l1 least-squares regression.

    Parameters
    ----------
    gamma : float
        Decay exponent of the regularization weights ``(k + a)^(-gamma)``.
    a : int
        Offset of the weight sequence, at least 2.
    max_iter : int
        Number of iterations.
    l1_weight : float
        Weight of the outer l1 term (rescales nothing in the solution set
        but changes the regularization path).
    t_mode : {"explicit", "fista"}
    trace_every : int
        Stride of the stored trace (``trace_``).

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    trace_ : IterateTrace
    """

    def __init__(self, gamma=1.5, a=2, max_iter=1000, l1_weight=1.0,
                 t_mode="explicit", trace_every=1):
        self.gamma = gamma
        self.a = a
        self.max_iter = max_iter
        self.l1_weight = l1_weight
        self.t_mode = t_mode
        self.trace_every = trace_every

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        return self._solve(fn.LeastSquares(X, y), X.shape[1])

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_


class FBiPGLogisticClassifier(_FBiPGMixin, ClassifierMixin, BaseEstimator):
    """Binary logistic regression with minimum-l1 selection among loss minimizers.

    Parameters are those of :class:`FBiPGRegressor`.  Labels may be any two
    distinct values; ``classes_[1]`` is the positive class.
    """

    def __init__(self, gamma=1.5, a=2, max_iter=1000, l1_weight=1.0,
                 t_mode="explicit", trace_every=1):
        self.gamma = gamma
        self.a = a
        self.max_iter = max_iter
        self.l1_weight = l1_weight
        self.t_mode = t_mode
        self.trace_every = trace_every

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_, z = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError(f"need exactly 2 classes, got {len(self.classes_)}")
        return self._solve(fn.Logistic(X, z.astype(float)), X.shape[1])

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_

    def predict_proba(self, X):
        t = self.decision_function(X)
        p = np.where(t >= 0, 1.0 / (1.0 + np.exp(-np.abs(t))),
                     np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
