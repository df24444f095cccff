"""Intercept-only maximum likelihood for each regression family.

Besides the MLE and its log-likelihood, a :class:`NullFit` caches what the
score tests need: a per-observation *score residual* ``r_i`` and a scalar
*unit information* ``c`` such that the score statistic of a predictor
``x`` is ``sum((x - mean(x)) * r) / sqrt(c * sum((x - mean(x))**2))``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .data import ResponseVector, validate_for_family
from .exceptions import ConvergenceError, DegenerateError, DomainError
from .families import FamilyModel, RegressionFamily
from .special import digamma, trigamma

STEP_TOL = 1e-9
MAX_ITER = 200


@dataclass(frozen=True)
class NullFit:
    """Fitted intercept-only model.

    ``params`` holds the family's natural parameters (``p``; ``mean``;
    ``shape, rate``; ``p, r``; ``alpha, beta``; ``shape, scale``) and
    ``eta``/``tau`` the same point on the regression scale used by
    :mod:`scorescreen.families`.
    """

    family: RegressionFamily
    params: dict
    loglik: float
    eta: float
    tau: float | None
    n: int
    residual: np.ndarray = field(repr=False)
    unit_information: float = 0.0
    cached: dict = field(default_factory=dict)
    iterations: int = 0

    def to_dict(self):
        return {
            "family": self.family.value,
            "params": {k: float(v) for k, v in self.params.items()},
            "loglik": float(self.loglik),
            "n": self.n,
            "iterations": self.iterations,
        }


class _Counter:
    def __init__(self):
        self._lock = threading.Lock()
        self.value = 0

    def increment(self):
        with self._lock:
            self.value += 1


#: incremented on every :func:`fit_null` call
FIT_COUNTER = _Counter()


def _as_values(y):
    return y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float)


def params_to_natural(family, eta, tau):
    """Map the regression-scale point (eta, tau) to the family's parameters."""
    family = RegressionFamily.parse(family)
    if family is RegressionFamily.LOGISTIC:
        return {"p": 1.0 / (1.0 + math.exp(-eta))}
    if family is RegressionFamily.POISSON:
        return {"mean": math.exp(eta)}
    nuis = math.exp(tau)
    mean = math.exp(eta)
    if family is RegressionFamily.GAMMA:
        return {"shape": nuis, "rate": nuis / mean}
    if family is RegressionFamily.NEGBIN:
        return {"p": nuis / (nuis + mean), "r": nuis}
    if family is RegressionFamily.BETA:
        mu = 1.0 / (1.0 + math.exp(-eta))
        return {"alpha": mu * nuis, "beta": (1.0 - mu) * nuis}
    return {"shape": nuis, "scale": mean}


def natural_to_params(family, params):
    """Inverse of :func:`params_to_natural`; validates the domain."""
    family = RegressionFamily.parse(family)
    vals = {k: float(v) for k, v in params.items()}
    for k, v in vals.items():
        if not np.isfinite(v) or v <= 0:
            raise DomainError(f"{family.value}: parameter {k}={v!r} must be positive")
    try:
        if family is RegressionFamily.LOGISTIC:
            p = vals["p"]
            if p >= 1:
                raise DomainError(f"logistic: p={p!r} must lie in (0, 1)")
            return math.log(p / (1.0 - p)), None
        if family is RegressionFamily.POISSON:
            return math.log(vals["mean"]), None
        if family is RegressionFamily.GAMMA:
            return math.log(vals["shape"] / vals["rate"]), math.log(vals["shape"])
        if family is RegressionFamily.NEGBIN:
            p, r = vals["p"], vals["r"]
            if p >= 1:
                raise DomainError(f"negbin: p={p!r} must lie in (0, 1)")
            return math.log(r * (1.0 - p) / p), math.log(r)
        if family is RegressionFamily.BETA:
            a, b = vals["alpha"], vals["beta"]
            return math.log(a / b), math.log(a + b)
        return math.log(vals["scale"]), math.log(vals["shape"])
    except KeyError as exc:
        raise DomainError(f"{family.value}: missing parameter {exc.args[0]!r}") from None


def loglik_null(y, family, params):
    """Log-likelihood of the intercept-only model at ``params``."""
    family = RegressionFamily.parse(family)
    eta, tau = natural_to_params(family, params)
    return FamilyModel(family, _as_values(y)).loglik(eta, tau)


# -- per-family solvers --------------------------------------------------

def _newton_scalar(value, grad_fn, step_fn, lower=0.0, name="parameter"):
    """Positive-constrained 1-D Newton iteration; returns (root, iterations)."""
    for it in range(1, MAX_ITER + 1):
        step = step_fn(value)
        new = value - step
        while new <= lower:
            step *= 0.5
            new = value - step
        if abs(new - value) <= STEP_TOL * abs(new):
            return new, it
        value = new
    raise ConvergenceError(
        f"{name}: Newton iteration did not converge in {MAX_ITER} steps",
        last_iterate=value,
        diagnostics={"gradient": grad_fn(value)},
    )


def _fit_gamma(y):
    mean = y.mean()
    c = math.log(mean) - np.log(y).mean()
    if c <= 0:
        raise DegenerateError("gamma: log(mean) - mean(log y) is not positive")

    def grad(a):
        return math.log(a) - digamma(a) - c

    def step(a):
        return grad(a) / (1.0 / a - trigamma(a))

    shape, it = _newton_scalar(0.5 / c, grad, step, name="gamma shape")
    return {"shape": shape, "rate": shape / mean}, it, {"sum_y": float(y.sum()), "sum_log_y": float(np.log(y).sum())}


def _fit_negbin(y):
    n = y.size
    mean = y.mean()
    var = y.var(ddof=1)
    if var <= mean:
        raise DegenerateError(
            f"negbin: response is not overdispersed (variance {var:.6g} <= mean {mean:.6g}); "
            "use the poisson family"
        )
    values, counts = np.unique(y, return_counts=True)

    def grad(r):
        return float(counts @ (digamma(values + r) - digamma(r))) + n * math.log(r / (r + mean))

    def hess(r):
        return float(counts @ (trigamma(values + r) - trigamma(r))) + n * mean / (r * (r + mean))

    # Newton on log r: d/dlog r = r g, d2/dlog r2 = r g + r^2 h
    log_r = math.log(min(max(mean * mean / (var - mean), 1e-3), 1e6))
    for it in range(1, MAX_ITER + 1):
        r = math.exp(log_r)
        g = r * grad(r)
        h = g + r * r * hess(r)
        if h >= 0:
            step = -math.copysign(min(1.0, abs(g) / n + 0.1), g)
        else:
            step = g / h
        step = max(min(step, 2.0), -2.0)
        log_r -= step
        if log_r > math.log(1e12):
            raise ConvergenceError(
                "negbin: size parameter diverges (data look Poisson); use the poisson family",
                last_iterate=math.exp(log_r),
            )
        if abs(step) <= STEP_TOL:
            r = math.exp(log_r)
            return {"p": r / (r + mean), "r": r}, it, {"sum_y": float(y.sum())}
    raise ConvergenceError(
        f"negbin: Newton iteration did not converge in {MAX_ITER} steps", last_iterate=math.exp(log_r)
    )


def _fit_beta(y):
    L1 = float(np.log(y).mean())
    L2 = float(np.log1p(-y).mean())
    m = y.mean()
    v = y.var(ddof=1)
    common = m * (1.0 - m) / v - 1.0
    a, b = (m * common, (1.0 - m) * common) if common > 0 else (1.0, 1.0)
    for it in range(1, MAX_ITER + 1):
        psi_ab = digamma(a + b)
        tri_ab = trigamma(a + b)
        g = np.array([psi_ab - digamma(a) + L1, psi_ab - digamma(b) + L2])
        H = np.array([[tri_ab - trigamma(a), tri_ab], [tri_ab, tri_ab - trigamma(b)]])
        step = np.linalg.solve(H, g)
        t = 1.0
        while a - t * step[0] <= 0 or b - t * step[1] <= 0:
            t *= 0.5
        na, nb = a - t * step[0], b - t * step[1]
        done = abs(na - a) <= STEP_TOL * na and abs(nb - b) <= STEP_TOL * nb
        a, b = na, nb
        if done:
            return (
                {"alpha": a, "beta": b},
                it,
                {"sum_log_y": L1 * y.size, "sum_log_1my": L2 * y.size},
            )
    raise ConvergenceError(
        f"beta: Newton iteration did not converge in {MAX_ITER} steps", last_iterate=(a, b)
    )


def _fit_weibull(y):
    log_y = np.log(y)
    centre = log_y.mean()
    L = log_y - centre
    if not np.any(L):
        raise DegenerateError("weibull: all responses are equal")

    def moments(k):
        z = k * L
        zmax = z.max()
        w = np.exp(z - zmax)
        sw = w.sum()
        return w, sw, zmax, float(w @ L) / sw, float(w @ (L * L)) / sw

    def grad(k):
        _, _, _, m1, _ = moments(k)
        return 1.0 / k - m1

    def step(k):
        _, _, _, m1, m2 = moments(k)
        return (1.0 / k - m1) / (-1.0 / (k * k) - (m2 - m1 * m1))

    kappa, it = _newton_scalar(1.0, grad, step, name="weibull shape")
    _, sw, zmax, _, _ = moments(kappa)
    log_mean_w = math.log(sw / y.size) + zmax
    scale = math.exp(centre + log_mean_w / kappa)
    return {"shape": kappa, "scale": scale}, it, {"sum_log_y": float(log_y.sum())}


def _score_pieces(family, y, params):
    """Per-observation score residual and unit information at the null."""
    if family is RegressionFamily.LOGISTIC:
        p = params["p"]
        return y - p, p * (1.0 - p)
    if family is RegressionFamily.POISSON:
        mean = params["mean"]
        return y - mean, mean
    if family is RegressionFamily.GAMMA:
        mean = params["shape"] / params["rate"]
        return y / mean - 1.0, 1.0 / params["shape"]
    if family is RegressionFamily.NEGBIN:
        p, r = params["p"], params["r"]
        mean = y.mean()
        return p * (y - mean), p * p * (mean + mean * mean / r)
    if family is RegressionFamily.BETA:
        a, b = params["alpha"], params["beta"]
        logit_y = np.log(y) - np.log1p(-y)
        return logit_y - (digamma(a) - digamma(b)), trigamma(a) + trigamma(b)
    kappa, scale = params["shape"], params["scale"]
    return np.exp(kappa * (np.log(y) - math.log(scale))) - 1.0, 1.0


def fit_null(y, family):
    """Intercept-only MLE and log-likelihood for ``family``.

    Closed form for logistic and Poisson; Newton iterations otherwise.

    Raises
    ------
    FamilyMismatchError
        Response kind incompatible with the family.
    DegenerateError
        Constant response (including all-0 / all-1 binary).
    ConvergenceError
        A Newton solver failed; ``last_iterate`` carries its final value.
    """
    family = RegressionFamily.parse(family)
    if not isinstance(y, ResponseVector):
        y = ResponseVector.from_values(y)
    validate_for_family(y, family)
    values = y.values
    FIT_COUNTER.increment()
    if np.all(values == values[0]):
        raise DegenerateError(f"{family.value}: response is constant ({values[0]!r}); null fit is degenerate")

    iterations = 0
    if family is RegressionFamily.LOGISTIC:
        params = {"p": float(values.mean())}
        cached = {"sum_y": float(values.sum())}
    elif family is RegressionFamily.POISSON:
        params = {"mean": float(values.mean())}
        cached = {"sum_y": float(values.sum())}
    elif family is RegressionFamily.GAMMA:
        params, iterations, cached = _fit_gamma(values)
    elif family is RegressionFamily.NEGBIN:
        params, iterations, cached = _fit_negbin(values)
    elif family is RegressionFamily.BETA:
        params, iterations, cached = _fit_beta(values)
    else:
        params, iterations, cached = _fit_weibull(values)

    params = {k: float(v) for k, v in params.items()}
    eta, tau = natural_to_params(family, params)
    loglik = FamilyModel(family, values).loglik(eta, tau)
    residual, info = _score_pieces(family, values, params)
    residual = np.asarray(residual, dtype=float)
    residual.setflags(write=False)
    return NullFit(
        family=family,
        params=params,
        loglik=loglik,
        eta=eta,
        tau=tau,
        n=values.size,
        residual=residual,
        unit_information=float(info),
        cached=cached,
        iterations=iterations,
    )
