"""Closed-form fast tests: family score tests, Pearson z and Welch's t.

The batch functions (``*_batch``) work on a block of columns at once and
report per-column failures in an ``errors`` list instead of raising; the
single-column functions raise.

For every family the score statistic is

    S = sum((x - xbar) * r) / sqrt(c * sum((x - xbar)**2))

with the score residual ``r`` and unit information ``c`` cached on the
:class:`~scorescreen.null_fit.NullFit`. For logistic and Poisson this is
exactly the familiar Cochran-Armitage / Poisson score form. For Gamma,
negative binomial, Beta and Weibull the information term uses the
*centred* sum of squares, which makes ``S**2`` invariant to shifting the
predictor; the raw ``sum(x**2)`` is only correct when ``xbar == 0``.
The sign of ``S`` follows the derivative of the log-likelihood in the slope.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .data import ResponseVector
from .exceptions import DegenerateError, SampleSizeError, StructureError
from .families import FamilyModel, RegressionFamily
from .special import chi2_sf_1df, normal_sf, student_t_sf

R_CLAMP = 1.0 - 1e-12
_REL_DEGENERATE = 1e-12


class TestKind(str, enum.Enum):
    SCORE = "score"
    LLR = "llr"
    PEARSON = "pearson"
    WELCH = "welch"

    __test__ = False  # keep pytest from collecting this

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown test {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class TestOutcome:
    """Result of one test on one predictor column.

    ``statistic`` is S for score tests, Lambda for the likelihood ratio,
    the Fisher z for Pearson and T_w for Welch. ``df`` is set for Welch only.
    """

    __test__ = False

    test: TestKind
    family: RegressionFamily | None
    statistic: float
    pvalue: float
    df: float | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


def _degenerate_columns(means, variances):
    variances = np.asarray(variances, dtype=float)
    return (variances <= 0) | (np.sqrt(np.maximum(variances, 0)) <= _REL_DEGENERATE * np.abs(means))


def _column_stats(X):
    n = X.shape[0]
    means = X.mean(axis=0)
    centered = X - means
    variances = np.einsum("ij,ij->j", centered, centered) / (n - 1)
    return means, variances


def score_batch(nf, X, means=None, variances=None):
    """Score statistics for every column of ``X`` (shape ``(n, k)``).

    Returns ``(statistic, pvalue, errors)``; failed columns carry NaN and an
    error message.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n != nf.n:
        raise StructureError(f"predictor length {n} != response length {nf.n}")
    if means is None or variances is None:
        means, variances = _column_stats(X)
    r = nf.residual
    # centred product: X.T @ r - mean * sum(r) cancels badly for |mean| >> sd
    numer = (X - means).T @ r
    ss = (n - 1) * np.asarray(variances, dtype=float)
    bad = _degenerate_columns(means, variances)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = numer / np.sqrt(nf.unit_information * ss)
    stat = np.where(bad, np.nan, stat)
    pval = np.full(stat.shape, np.nan)
    good = ~bad
    if np.any(good):
        pval[good] = chi2_sf_1df(stat[good] ** 2)
    errors = ["degenerate predictor (zero variance)" if b else None for b in bad]
    return stat, pval, errors


def score_statistic(y, nf, x, moments=None):
    """Score test of one predictor against the fitted null ``nf``.

    ``moments`` may be a :class:`~scorescreen.data.ColumnMoments` (or any
    object with ``mean`` and ``variance``) to skip recomputing them.
    """
    x = np.asarray(x, dtype=float).ravel()
    values = y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float)
    if x.size != values.size or x.size != nf.n:
        raise StructureError(f"predictor length {x.size} != response length {values.size}")
    if moments is None:
        means, variances = _column_stats(x[:, None])
    else:
        means, variances = np.array([moments.mean]), np.array([moments.variance])
    if _degenerate_columns(means, variances)[0]:
        raise DegenerateError("predictor has zero variance")
    stat, pval, _ = score_batch(nf, x[:, None], means, variances)
    return TestOutcome(TestKind.SCORE, nf.family, float(stat[0]), float(pval[0]))


# -- Pearson -------------------------------------------------------------

def pearson_batch(y, X, means=None, variances=None):
    """Pearson correlation z-tests of ``y`` against each column of ``X``.

    Returns ``(z, pvalue, errors, r)``.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = y.size
    if X.shape[0] != n:
        raise StructureError(f"predictor length {X.shape[0]} != response length {n}")
    if n <= 3:
        raise SampleSizeError(f"pearson z needs n > 3, got {n}")
    y_mean = y.mean()
    y_var = float(np.dot(y - y_mean, y - y_mean)) / (n - 1)
    if _degenerate_columns(np.array([y_mean]), np.array([y_var]))[0]:
        raise DegenerateError("response is constant; correlation undefined")
    if means is None or variances is None:
        means, variances = _column_stats(X)
    yc = y - y_mean
    # n*sum(xy) - sum(x)sum(y) and n*sum(x^2) - sum(x)^2, evaluated on centred data
    cross = (X - means).T @ yc
    bad = _degenerate_columns(means, variances)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = cross / ((n - 1) * np.sqrt(variances * y_var))
    r = np.clip(r, -R_CLAMP, R_CLAMP)
    z = np.arctanh(r) * math.sqrt(n - 3)
    z = np.where(bad, np.nan, z)
    r = np.where(bad, np.nan, r)
    pval = np.full(z.shape, np.nan)
    good = ~bad
    if np.any(good):
        pval[good] = np.minimum(1.0, 2.0 * normal_sf(np.abs(z[good])))
    errors = ["degenerate predictor (zero variance)" if b else None for b in bad]
    return z, pval, errors, r


def pearson_z(y, x):
    """Fisher-z test of zero correlation; two-sided normal p-value."""
    y = y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if x.size != y.size:
        raise StructureError(f"predictor length {x.size} != response length {y.size}")
    z, pval, errors, _ = pearson_batch(y, x[:, None])
    if errors[0]:
        raise DegenerateError("predictor has zero variance")
    return TestOutcome(TestKind.PEARSON, None, float(z[0]), float(pval[0]))


# -- Welch ---------------------------------------------------------------

def _binary_groups(y):
    y = np.asarray(y, dtype=float)
    if np.any((y != 0) & (y != 1)):
        raise StructureError("welch t-test needs a binary (0/1) response")
    ones = y == 1
    n1 = int(ones.sum())
    n0 = y.size - n1
    if n1 < 2 or n0 < 2:
        raise SampleSizeError(f"welch t-test needs >= 2 observations per group, got {n1} and {n0}")
    return ones, n1, n0


def welch_batch(y, X):
    """Welch's t for each column of ``X`` split by binary ``y``.

    Group 1 is ``y == 1`` and group 2 is ``y == 0``, so the statistic has the
    same sign as the logistic score. Returns ``(t, pvalue, errors, df)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.size:
        raise StructureError(f"predictor length {X.shape[0]} != response length {y.size}")
    ones, n1, n0 = _binary_groups(y)
    m1, v1 = _column_stats(X[ones])
    m0, v0 = _column_stats(X[~ones])
    q1 = v1 / n1
    q0 = v0 / n0
    se2 = q1 + q0
    bad = se2 <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (m1 - m0) / np.sqrt(se2)
        df = se2 * se2 / (q1 * q1 / (n1 - 1) + q0 * q0 / (n0 - 1))
    t = np.where(bad, np.nan, t)
    df = np.where(bad, np.nan, df)
    pval = np.full(t.shape, np.nan)
    good = ~bad
    if np.any(good):
        pval[good] = np.minimum(1.0, 2.0 * student_t_sf(np.abs(t[good]), df[good]))
    errors = ["degenerate predictor (zero variance in both groups)" if b else None for b in bad]
    return t, pval, errors, df


def welch_t(x, y):
    """Welch's unequal-variance t-test of ``x`` between the classes of ``y``."""
    y = y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float).ravel()
    t, pval, errors, df = welch_batch(y, np.asarray(x, dtype=float).ravel())
    if errors[0]:
        raise DegenerateError(errors[0])
    return TestOutcome(TestKind.WELCH, RegressionFamily.LOGISTIC, float(t[0]), float(pval[0]), float(df[0]))


# -- finite-difference oracle --------------------------------------------

def _expected_curvature(family, eta, tau, h=1e-4):
    """E[-d^2/d eta^2 log f(Y; eta, tau)] under the null, by summation or quadrature.

    The second derivative is a central second difference of the log density;
    the expectation is taken against the same density.
    """
    family = RegressionFamily.parse(family)

    def curvature(values):
        model = FamilyModel(family, values)
        return -(model.logpdf(eta + h, tau) - 2.0 * model.logpdf(eta, tau) + model.logpdf(eta - h, tau)) / (h * h)

    def density(values):
        return np.exp(FamilyModel(family, values).logpdf(eta, tau))

    if family is RegressionFamily.LOGISTIC:
        support = np.array([0.0, 1.0])
        return float(density(support) @ curvature(support))
    if family in (RegressionFamily.POISSON, RegressionFamily.NEGBIN):
        mean = math.exp(eta)
        var = mean if family is RegressionFamily.POISSON else mean + mean * mean / math.exp(tau)
        upper = int(mean + 40.0 * math.sqrt(var) + 60)
        support = np.arange(upper + 1, dtype=float)
        return float(density(support) @ curvature(support))

    if family is RegressionFamily.BETA:
        nodes, weights = _tanh_sinh_unit()
    else:
        nodes, weights = _exp_sinh(math.exp(eta))
    return float(weights @ (density(nodes) * curvature(nodes)))


def _tanh_sinh_unit(step=1.0 / 64, span=4.0):
    """Double-exponential nodes/weights on (0, 1); endpoint singularities are fine."""
    t = np.arange(-span, span + step / 2, step)
    u = 0.5 * math.pi * np.sinh(t)
    y = 1.0 / (1.0 + np.exp(-2.0 * u))
    w = step * 0.5 * math.pi * np.cosh(t) / (2.0 * np.cosh(u) ** 2)
    keep = (y > 0) & (y < 1) & (w > 0)
    return y[keep], w[keep]


def _exp_sinh(scale, step=1.0 / 64, span=4.5):
    """Double-exponential nodes/weights on (0, inf), centred on ``scale``."""
    t = np.arange(-span, span + step / 2, step)
    y = scale * np.exp(0.5 * math.pi * np.sinh(t))
    w = step * y * 0.5 * math.pi * np.cosh(t)
    keep = (y > 0) & np.isfinite(y)
    return y[keep], w[keep]


def numeric_score_oracle(y, family, nf, x, h=1e-6):
    """Score statistic from finite differences of the full log-likelihood.

    ``U0`` is the central difference of ``l(a, b)`` in the slope at
    ``(a_null, 0)`` with nuisance parameters held at their null MLE. Its
    variance is the expected negative second difference in the slope; at
    the null every observation shares one expected curvature ``c``, and the
    slope is orthogonal to the intercept and nuisance once ``x`` is centred,
    so ``Var(U0) = c * sum((x - xbar)**2)``. ``c`` is an exact sum over the
    support for discrete families and a double-exponential quadrature for
    continuous ones. Verification only.
    """
    family = RegressionFamily.parse(family)
    values = y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    model = FamilyModel(family, values)
    up = model.logpdf(nf.eta + h * x, nf.tau)
    down = model.logpdf(nf.eta - h * x, nf.tau)
    u0 = math.fsum((up - down) / (2.0 * h))
    xc = x - x.mean()
    var_u0 = _expected_curvature(family, nf.eta, nf.tau) * math.fsum(xc * xc)
    return u0 / math.sqrt(var_u0)


__all__ = [
    "TestKind",
    "TestOutcome",
    "score_batch",
    "score_statistic",
    "pearson_batch",
    "pearson_z",
    "welch_batch",
    "welch_t",
    "numeric_score_oracle",
]
