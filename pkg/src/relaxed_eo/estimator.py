"""scikit-learn style wrapper around the postprocessing pipeline."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .data import LabeledPredictions, LossSpec, prevalences
from .postprocess import (
    evaluate_policy,
    policy_from_solution,
    positive_probability,
    predict_batch,
)
from .roc import build_hulls
from .solver import RelaxedProblem, solve_relaxed


def _scores_1d(X):
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single score column, got shape {X.shape}")
        X = X[:, 0]
    return X


class RelaxedEqualizedOdds(ClassifierMixin, BaseEstimator):
    """Group-threshold postprocessing under relaxed equalized odds.

    ``X`` holds the base model's scores in [0, 1], one per row (a 1-D array
    or a single column). The group of each row is passed separately.

    Parameters
    ----------
    alpha : float, default=0.0
        Largest allowed FPR or TPR gap between any two groups. ``inf``
        removes the constraint (unprocessing).
    fp_cost, fn_cost : float, default=1.0
        Costs of false positives and false negatives.
    seed : int, default=42
        Seed for per-row randomization in :meth:`predict`.
    allow_degenerate : bool, default=False
        Accept groups lacking positives or negatives; their undefined rate
        is left out of the constraint.

    Attributes
    ----------
    solution_ : RelaxedSolution
    policy_ : ThresholdPolicy
    groups_ : tuple of str
    classes_ : ndarray
    """

    def __init__(self, alpha=0.0, fp_cost=1.0, fn_cost=1.0, seed=42, allow_degenerate=False):
        self.alpha = alpha
        self.fp_cost = fp_cost
        self.fn_cost = fn_cost
        self.seed = seed
        self.allow_degenerate = allow_degenerate

    def _loss(self):
        return LossSpec(self.fp_cost, self.fn_cost)

    def fit(self, X, y, groups):
        scores = _scores_1d(X)
        check_consistent_length(scores, y, groups)
        data = LabeledPredictions.from_arrays(scores, y, groups)
        alpha = math.inf if self.alpha is None else float(self.alpha)
        self.hulls_ = build_hulls(data, self.allow_degenerate)
        self.prevalences_ = prevalences(data)
        problem = RelaxedProblem(
            self.hulls_, self.prevalences_, self._loss(), alpha, self.allow_degenerate
        )
        self.solution_ = solve_relaxed(problem)
        self.policy_ = policy_from_solution(self.solution_, self.hulls_, self.seed)
        self.groups_ = data.groups
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X, groups):
        """Probability of a positive decision under the fitted randomization."""
        check_is_fitted(self, "policy_")
        scores = _scores_1d(X)
        check_consistent_length(scores, groups)
        p = positive_probability(self.policy_, scores, groups)
        return np.column_stack((1.0 - p, p))

    def predict(self, X, groups, row_index=None):
        """Sampled decisions; row ``i`` is reproducible from ``(seed, row_index[i])``."""
        check_is_fitted(self, "policy_")
        scores = _scores_1d(X)
        check_consistent_length(scores, groups)
        preds, _ = predict_batch(self.policy_, scores, groups, row_index, self.seed)
        return preds.astype(int)

    def evaluate(self, X, y, groups):
        """Analytic :class:`EvalReport` of the fitted policy on labeled scores."""
        check_is_fitted(self, "policy_")
        data = LabeledPredictions.from_arrays(_scores_1d(X), y, groups)
        return evaluate_policy(self.policy_, data, self._loss(), allow_degenerate=self.allow_degenerate)

    def score(self, X, y, groups):
        """Expected accuracy of the randomized classifier."""
        return self.evaluate(X, y, groups).accuracy
