"""scikit-learn front end: a univariate filter usable in pipelines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .data import Dataset, PredictorMatrix, ResponseVector
from .families import COMPATIBLE_KINDS, RegressionFamily
from .score import TestKind
from .screening import ScreeningConfig, Threshold, TopK, screen


def _validate_response(y, family):
    y = np.asarray(y, dtype=float).ravel()
    return ResponseVector(y, COMPATIBLE_KINDS[RegressionFamily.parse(family)])


class UnivariateFilter(SelectorMixin, BaseEstimator):
    """Keep the predictors most associated with ``y`` under a univariate test.

    The intercept-only model of ``family`` is fitted once and every column
    of ``X`` is tested against it.

    Parameters
    ----------
    family : str, default="logistic"
        One of logistic, poisson, gamma, negbin, beta, weibull.
    test : str, default="score"
        score, llr, pearson or welch.
    alpha : float, default=0.05
        Significance level of the threshold rule.
    selection : {"threshold", "topk"}, default="threshold"
    top_k : int, optional
        Columns kept under ``selection="topk"``; ``None`` means ``floor(n / ln n)``.
    n_jobs : int, optional
        Worker threads for the column sweep.

    Attributes
    ----------
    scores_ : ndarray of shape (n_features,)
        Test statistics (S, Lambda, Fisher z or Welch t).
    pvalues_ : ndarray of shape (n_features,)
    null_fit_ : NullFit
    report_ : ScreeningReport
    n_features_in_ : int

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X = rng.standard_normal((300, 5))
    >>> y = (rng.random(300) < 1 / (1 + np.exp(-2 * X[:, 3]))).astype(float)
    >>> UnivariateFilter(selection="topk", top_k=1).fit(X, y).get_support(indices=True)
    array([3])
    """

    def __init__(self, family="logistic", test="score", alpha=0.05, selection="threshold", top_k=None, n_jobs=None):
        self.family = family
        self.test = test
        self.alpha = alpha
        self.selection = selection
        self.top_k = top_k
        self.n_jobs = n_jobs

    def _config(self):
        if self.selection == "threshold":
            rule = Threshold(self.alpha)
        elif self.selection == "topk":
            rule = TopK(self.top_k)
        else:
            raise ValueError(f"selection must be 'threshold' or 'topk', got {self.selection!r}")
        return ScreeningConfig(self.family, TestKind.parse(self.test), self.alpha, rule, self.n_jobs)

    def fit(self, X, y):
        cfg = self._config()
        if y is None:
            raise ValueError(f"{type(self).__name__} requires y to be passed, but the target y is None")
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=4)
        response = _validate_response(y, cfg.family)
        if len(response) != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {len(response)}")
        names = getattr(self, "feature_names_in_", None)
        ds = Dataset(response, PredictorMatrix(X, None if names is None else list(names)))
        self.report_ = screen(ds, cfg)
        self.null_fit_ = self.report_.null_fit
        self.scores_ = self.report_.statistics()
        self.pvalues_ = self.report_.pvalues()
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "report_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[list(self.report_.selected)] = True
        return mask

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.required = True
        return tags


def univariate_scores(X, y, family="logistic", test="score"):
    """``(scores, pvalues)`` for ``sklearn.feature_selection.SelectKBest``.

    Scores are squared statistics so that larger means more significant;
    failed columns score 0 with p-value 1.
    """
    X = np.asarray(X, dtype=float)
    ds = Dataset(_validate_response(y, family), PredictorMatrix(X))
    report = screen(ds, ScreeningConfig(family, TestKind.parse(test), threads=1))
    stat = report.statistics()
    pval = report.pvalues()
    bad = ~np.isfinite(pval)
    return np.where(bad, 0.0, stat * stat), np.where(bad, 1.0, pval)


__all__ = ["UnivariateFilter", "univariate_scores"]
