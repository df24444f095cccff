"""Likelihood-ratio path: fit ``g(mean) = a + b x`` per predictor.

Each fit re-estimates the nuisance parameter jointly with ``(a, b)`` by a
damped Newton iteration on ``theta = (a, b[, log nuisance])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ResponseVector, validate_for_family
from .exceptions import ConvergenceError, DegenerateError, SeparationError, StructureError
from .families import FamilyModel, RegressionFamily
from .null_fit import NullFit, fit_null
from .score import TestKind, TestOutcome, _degenerate_columns
from .special import chi2_sf_1df

MAX_ITER = 100
MAX_HALVINGS = 30
LOGLIK_TOL = 1e-10
GRAD_TOL = 1e-8
LAMBDA_FLOOR = -1e-8
ROUNDOFF = 1e-13
MAX_STALLS = 3


@dataclass(frozen=True)
class UnivariateFit:
    family: RegressionFamily
    a: float
    b: float
    aux: float | None
    loglik: float
    iterations: int
    converged: bool
    gradient_norm: float


def _assemble(model, x, theta, has_tau):
    """Log-likelihood, gradient and Hessian at ``theta``."""
    eta = theta[0] + theta[1] * x
    tau = theta[2] if has_tau else None
    ll = model.loglik(eta, tau)
    d1, d2, dt, dtt, det = model.derivatives(eta, tau)
    if has_tau:
        g = np.array([d1.sum(), d1 @ x, dt.sum()])
        h_ab = d2 @ x
        h_at = det.sum()
        h_bt = det @ x
        H = np.array(
            [
                [d2.sum(), h_ab, h_at],
                [h_ab, d2 @ (x * x), h_bt],
                [h_at, h_bt, dtt.sum()],
            ]
        )
    else:
        g = np.array([d1.sum(), d1 @ x])
        h_ab = d2 @ x
        H = np.array([[d2.sum(), h_ab], [h_ab, d2 @ (x * x)]])
    return ll, g, H


def _ascent_direction(g, H):
    """Newton direction, with a Levenberg shift when -H is not positive definite."""
    A = -H
    shift = 0.0
    scale = max(np.abs(np.diag(A)).max(), 1e-12)
    for _ in range(60):
        try:
            L = np.linalg.cholesky(A + shift * np.eye(len(g)))
        except np.linalg.LinAlgError:
            shift = max(2.0 * shift, 1e-8 * scale)
            continue
        return np.linalg.solve(L.T, np.linalg.solve(L, g))
    return g / scale


def _cold_start(family, y):
    """Moment-based starting point on the regression scale."""
    m = float(y.mean())
    if family is RegressionFamily.LOGISTIC:
        return [math.log(m / (1.0 - m))]
    if family is RegressionFamily.POISSON:
        return [math.log(m)]
    v = float(y.var(ddof=1))
    if family is RegressionFamily.GAMMA:
        return [math.log(m), math.log(m * m / v)]
    if family is RegressionFamily.NEGBIN:
        return [math.log(m), math.log(min(max(m * m / max(v - m, 1e-12), 1e-3), 1e6))]
    if family is RegressionFamily.BETA:
        common = m * (1.0 - m) / v - 1.0
        return [math.log(m / (1.0 - m)), math.log(common if common > 0 else 2.0)]
    ly = np.log(y)
    return [float(ly.mean()) + 0.5772 * float(ly.std()), math.log(1.2825 / max(float(ly.std()), 1e-12))]


def fit_univariate(y, x, family, warm_start=None):
    """Joint MLE of intercept, slope and nuisance for one predictor.

    Parameters
    ----------
    y : ResponseVector or array-like
    x : array-like of shape (n,)
    family : RegressionFamily or str
    warm_start : NullFit, optional
        Start from ``(a_null, 0, nuisance_null)``; otherwise from moments.

    Raises
    ------
    DegenerateError
        ``x`` is constant.
    SeparationError
        Logistic classes do not overlap along ``x``, so the slope MLE is infinite.
    ConvergenceError
        No convergence within 100 iterations.
    """
    family = RegressionFamily.parse(family)
    if not isinstance(y, ResponseVector):
        y = ResponseVector.from_values(y)
    validate_for_family(y, family)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != len(y):
        raise StructureError(f"predictor length {x.size} != response length {len(y)}")
    return _fit(FamilyModel(family, y.values), x, warm_start)


def _check_separation(y, x):
    """In one dimension the slope MLE is infinite exactly when the classes
    do not overlap along ``x`` (complete or quasi-complete separation)."""
    ones = y == 1.0
    x1, x0 = x[ones], x[~ones]
    if x1.min() >= x0.max() or x1.max() <= x0.min():
        raise SeparationError(
            "logistic: predictor separates the classes; the slope MLE does not exist",
            diagnostics={"class_1_range": (float(x1.min()), float(x1.max())),
                         "class_0_range": (float(x0.min()), float(x0.max()))},
        )


def _fit(model, x, warm_start=None):
    family = model.family
    values = model.y
    x_mean = x.mean()
    x_sd = float(np.sqrt(((x - x_mean) ** 2).sum() / (x.size - 1)))
    if _degenerate_columns(np.array([x_mean]), np.array([x_sd * x_sd]))[0]:
        raise DegenerateError("predictor has zero variance")
    has_tau = family.has_nuisance
    if family is RegressionFamily.LOGISTIC:
        _check_separation(values, x)

    if warm_start is not None:
        start = [warm_start.eta, 0.0] + ([warm_start.tau] if has_tau else [])
    else:
        cold = _cold_start(family, values)
        start = [cold[0], 0.0] + cold[1:]
    theta = np.array(start, dtype=float)

    ll, g, H = _assemble(model, x, theta, has_tau)
    if not np.isfinite(ll):
        raise ConvergenceError("log-likelihood not finite at the starting point", last_iterate=theta)
    improvement = np.inf
    stalls = 0
    for it in range(1, MAX_ITER + 1):
        gnorm = float(np.linalg.norm(g))
        if improvement < LOGLIK_TOL and gnorm < GRAD_TOL:
            return _result(family, theta, ll, it - 1, True, gnorm)
        if stalls >= MAX_STALLS:
            # the gradient is at the rounding floor of its own evaluation
            return _result(family, theta, ll, it - 1, True, gnorm)
        direction = _ascent_direction(g, H)
        decrement = float(g @ direction)
        resolution = ROUNDOFF * max(1.0, abs(ll))
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + step * direction
            cand_ll = model.loglik(cand[0] + cand[1] * x, cand[2] if has_tau else None)
            # ties within rounding count as ascent so Newton can finish polishing
            if cand_ll >= ll - resolution:
                break
            step *= 0.5
        else:
            if decrement < resolution:
                return _result(family, theta, ll, it, True, gnorm)
            raise ConvergenceError(
                f"{family.value}: line search failed",
                last_iterate=theta,
                diagnostics={"iterations": it, "gradient_norm": gnorm, "loglik": ll},
            )
        improvement = cand_ll - ll
        theta = cand
        ll, g, H = _assemble(model, x, theta, has_tau)
        stalled = decrement < resolution and float(np.linalg.norm(g)) >= gnorm
        stalls = stalls + 1 if stalled else 0
    raise ConvergenceError(
        f"{family.value}: no convergence in {MAX_ITER} iterations",
        last_iterate=theta,
        diagnostics={"gradient_norm": float(np.linalg.norm(g)), "loglik": ll},
    )


def _result(family, theta, ll, iterations, converged, gnorm):
    aux = math.exp(theta[2]) if family.has_nuisance else None
    return UnivariateFit(family, float(theta[0]), float(theta[1]), aux, float(ll), iterations, converged, gnorm)


def lambda_to_outcome(family, lam):
    if lam < 0:
        if lam < LAMBDA_FLOOR:
            raise ConvergenceError(f"likelihood ratio {lam!r} is negative beyond tolerance")
        lam = 0.0
    return TestOutcome(TestKind.LLR, family, lam, float(chi2_sf_1df(lam)))


def llr_statistic(y, x, family, nf=None):
    """Likelihood-ratio test 2 (l1 - l0) of one predictor, chi-square(1) p-value."""
    family = RegressionFamily.parse(family)
    if nf is None:
        nf = fit_null(y, family)
    elif not isinstance(nf, NullFit) or nf.family is not family:
        raise StructureError("null fit does not match the requested family")
    fit = fit_univariate(y, x, family, warm_start=nf)
    return lambda_to_outcome(family, 2.0 * (fit.loglik - nf.loglik))


def llr_batch(y, X, nf):
    """Likelihood-ratio statistics for every column of ``X``.

    Returns ``(statistic, pvalue, errors)``; failures are recorded per column.
    """
    values = y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    k = X.shape[1]
    if X.shape[0] != values.size:
        raise StructureError(f"predictor length {X.shape[0]} != response length {values.size}")
    model = FamilyModel(nf.family, values)
    stat = np.full(k, np.nan)
    pval = np.full(k, np.nan)
    errors = [None] * k
    for j in range(k):
        try:
            fit = _fit(model, X[:, j], warm_start=nf)
            out = lambda_to_outcome(nf.family, 2.0 * (fit.loglik - nf.loglik))
        except (ConvergenceError, DegenerateError) as exc:
            errors[j] = f"{type(exc).__name__}: {exc}"
            continue
        stat[j] = out.statistic
        pval[j] = out.pvalue
    return stat, pval, errors


__all__ = [
    "UnivariateFit",
    "fit_univariate",
    "llr_statistic",
    "llr_batch",
]
