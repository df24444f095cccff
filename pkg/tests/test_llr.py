import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from scorescreen.exceptions import ConvergenceError, DegenerateError, SeparationError
from scorescreen.families import FamilyModel, RegressionFamily
from scorescreen.llr import fit_univariate, lambda_to_outcome, llr_batch, llr_statistic
from scorescreen.null_fit import fit_null
from scorescreen.score import score_statistic

from .test_null_fit import FAMILIES, draw


def test_poisson_matches_nelder_mead():
    rng = np.random.default_rng(17)
    x = rng.normal(size=500)
    y = rng.poisson(np.exp(0.4 + 0.3 * x)).astype(float)
    fit = fit_univariate(y, x, "poisson")

    def negll(theta):
        eta = theta[0] + theta[1] * x
        return -np.sum(y * eta - np.exp(eta) - [math.lgamma(v + 1) for v in y])

    res = optimize.minimize(negll, [0.0, 0.0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    assert fit.loglik == pytest.approx(-res.fun, abs=1e-6)
    assert fit.converged and fit.gradient_norm < 1e-8


@pytest.mark.parametrize("family", FAMILIES)
def test_all_families_match_direct_maximisation(family):
    rng = np.random.default_rng(23)
    y = draw(family, rng, 300)
    x = rng.normal(size=300)
    fit = fit_univariate(y, x, family, warm_start=fit_null(y, family))
    model = FamilyModel(family, y)

    def negll(theta):
        return -model.loglik(theta[0] + theta[1] * x, theta[2] if family.has_nuisance else None)

    start = [fit.a, fit.b] + ([math.log(fit.aux)] if family.has_nuisance else [])
    res = optimize.minimize(
        negll, np.array(start) + 0.02, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000}
    )
    assert fit.loglik >= -res.fun - 1e-6
    assert fit.loglik == pytest.approx(-res.fun, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_warm_and_cold_start_agree(family):
    rng = np.random.default_rng(31)
    for _ in range(50):
        y = draw(family, rng, 120)
        x = rng.normal(size=120)
        nf = fit_null(y, family)
        warm = fit_univariate(y, x, family, warm_start=nf)
        cold = fit_univariate(y, x, family)
        assert warm.loglik == pytest.approx(cold.loglik, abs=1e-8)
        assert warm.loglik >= nf.loglik - 1e-8
        assert warm.converged and warm.gradient_norm < 1e-8


def test_separation_is_an_error():
    x = np.linspace(-1, 1, 40)
    y = (x > np.median(x)).astype(float)
    with pytest.raises(SeparationError) as info:
        fit_univariate(y, x, "logistic")
    assert isinstance(info.value, ConvergenceError)
    assert "class_1_range" in info.value.diagnostics


def test_quasi_separation_is_an_error():
    x = np.array([0.0, 1.0, 2.0, 2.0, 3.0, 4.0])
    y = np.array([0, 0, 0, 1, 1, 1], dtype=float)
    with pytest.raises(SeparationError):
        fit_univariate(y, x, "logistic")


def test_near_separation_has_finite_fit():
    x = np.linspace(-1, 1, 40)
    y = (x > 0).astype(float)
    y[[5, 30]] = 1 - y[[5, 30]]
    fit = fit_univariate(y, x, "logistic")
    assert fit.converged and math.isfinite(fit.b) and fit.b > 0


def test_batch_records_separation_per_column(rng):
    y = (rng.random(60) < 0.5).astype(float)
    X = rng.normal(size=(60, 3))
    X[:, 1] = y + 0.01 * rng.random(60)
    X[:, 2] = 4.0
    stat, pval, errors = llr_batch(y, X, fit_null(y, "logistic"))
    assert errors[0] is None and np.isfinite(stat[0])
    assert "SeparationError" in errors[1]
    assert "DegenerateError" in errors[2]


def test_degenerate_predictor():
    with pytest.raises(DegenerateError):
        fit_univariate([0.0, 1.0, 0.0, 1.0], [1.0, 1.0, 1.0, 1.0], "logistic")


def test_lambda_edge_cases():
    out = lambda_to_outcome(RegressionFamily.POISSON, 0.0)
    assert out.statistic == 0.0 and out.pvalue == 1.0
    out = lambda_to_outcome(RegressionFamily.POISSON, 2 * 1.9207)
    assert out.statistic == pytest.approx(3.8414)
    assert out.pvalue == pytest.approx(0.05, abs=1e-5)
    assert lambda_to_outcome(RegressionFamily.POISSON, -5e-9).statistic == 0.0
    with pytest.raises(ConvergenceError):
        lambda_to_outcome(RegressionFamily.POISSON, -1e-6)


def test_null_slope_small_at_large_n():
    rng = np.random.default_rng(2)
    y = rng.poisson(3.0, 20000).astype(float)
    x = rng.normal(size=20000)
    fit = fit_univariate(y, x, "poisson")
    assert abs(fit.b) < 0.05
    out = llr_statistic(y, x, "poisson")
    assert 0.0 <= out.statistic < 20


@pytest.mark.parametrize("family", FAMILIES)
def test_lambda_close_to_score_squared(family):
    rng = np.random.default_rng(41)
    y = draw(family, rng, 5000)
    nf = fit_null(y, family)
    for _ in range(5):
        x = rng.normal(size=5000)
        lam = llr_statistic(y, x, family, nf).statistic
        s2 = score_statistic(y, nf, x).statistic ** 2
        assert lam == pytest.approx(s2, abs=0.05 + 0.02 * s2)


@given(st.integers(0, 2**32 - 1), st.sampled_from(FAMILIES))
def test_lambda_is_nonnegative(seed, family):
    rng = np.random.default_rng(seed)
    y = draw(family, rng, 40)
    if np.all(y == y[0]) or (family is RegressionFamily.NEGBIN and y.var(ddof=1) <= y.mean()):
        return
    x = rng.normal(size=40)
    nf = fit_null(y, family)
    try:
        out = llr_statistic(y, x, family, nf)
    except SeparationError:
        return
    assert out.statistic >= 0.0
    assert 0.0 <= out.pvalue <= 1.0
