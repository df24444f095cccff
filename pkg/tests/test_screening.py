import json

import numpy as np
import pytest

from scorescreen.data import Dataset, PredictorMatrix, ResponseVector
from scorescreen.exceptions import DegenerateError, FamilyMismatchError
from scorescreen.families import ResponseKind
from scorescreen.null_fit import FIT_COUNTER
from scorescreen.score import TestKind, TestOutcome
from scorescreen.screening import (
    BLOCK_COLUMNS,
    ScreeningConfig,
    Threshold,
    TopK,
    compare_tests,
    screen,
    select,
)
from scorescreen.simulation import SimDesign, generate_null_dataset, generate_planted_dataset


def logistic_ds(seed=0, n=400, d=150):
    return generate_null_dataset(SimDesign("logistic", (0.4,), n, d, 1, seed), 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ScreeningConfig("logistic", alpha=1.5)
    with pytest.raises(ValueError):
        TopK(0)
    with pytest.raises(ValueError):
        ScreeningConfig("logistic", test=())
    with pytest.raises(ValueError):
        ScreeningConfig("logistic", threads=0)
    with pytest.raises(ValueError):
        ScreeningConfig("tobit")
    cfg = ScreeningConfig("gamma", "llr")
    assert cfg.test == (TestKind.LLR,)
    assert cfg.selection == Threshold(0.05)


def test_null_fitted_once():
    ds = logistic_ds()
    before = FIT_COUNTER.value
    report = screen(ds, ScreeningConfig("logistic", ("score", "llr", "pearson", "welch"), threads=4))
    assert FIT_COUNTER.value == before + 1
    assert report.counts == {"null_fits": 1, "h1_fits": ds.d}


def test_threshold_selection_matches_pvalues():
    ds = logistic_ds()
    report = screen(ds, ScreeningConfig("logistic", "score", alpha=0.1))
    p = report.pvalues()
    assert report.selected == tuple(int(j) for j in np.flatnonzero(p <= 0.1))
    assert set(report.selected) <= {j for j, o in enumerate(report.per_column) if o.ok}


def test_topk_returns_k_sorted():
    ds = logistic_ds(d=10)
    report = screen(ds, ScreeningConfig("logistic", "score", selection=TopK(3)))
    assert len(report.selected) == 3
    p = report.pvalues()
    assert list(p[list(report.selected)]) == sorted(p)[:3]


def test_topk_default_k():
    ds = logistic_ds(n=100, d=40)
    report = screen(ds, ScreeningConfig("logistic", "score", selection=TopK()))
    assert len(report.selected) == 21


def test_topk_tie_breaking():
    outs = [
        TestOutcome(TestKind.SCORE, None, 1.0, 0.01),
        TestOutcome(TestKind.SCORE, None, -3.0, 0.01),
        TestOutcome(TestKind.SCORE, None, 3.0, 0.01),
        TestOutcome(TestKind.SCORE, None, 9.0, 0.001),
        TestOutcome(TestKind.SCORE, None, float("nan"), float("nan"), error="bad"),
    ]
    assert select(outs, TopK(4), 10) == (3, 1, 2, 0)
    assert select(outs, TopK(10), 10) == (3, 1, 2, 0)


def test_error_columns_reported_not_selected():
    ds = logistic_ds(d=5)
    X = ds.predictors.data.copy()
    X[:, 2] = 1.0
    ds = Dataset(ds.response, PredictorMatrix(X))
    report = screen(ds, ScreeningConfig("logistic", ("score", "llr"), alpha=0.99, selection=TopK(5)))
    assert report.errors() == {2: report.per_column[2].error}
    assert 2 not in report.selected
    assert len(report.selected) == 4
    assert report.errors("llr").keys() == {2}


def test_deterministic_across_threads():
    ds = logistic_ds(d=3 * BLOCK_COLUMNS + 5)
    tests = ("score", "llr", "pearson", "welch")
    a = screen(ds, ScreeningConfig("logistic", tests, threads=1, selection=TopK(10)))
    b = screen(ds, ScreeningConfig("logistic", tests, threads=8, selection=TopK(10)))
    assert a.to_json(timings=False) == b.to_json(timings=False)
    assert a.to_csv() == b.to_csv()
    for t in tests:
        np.testing.assert_array_equal(a.statistics(t), b.statistics(t))


def test_null_fit_failure_aborts():
    ds = Dataset(ResponseVector(np.ones(10), ResponseKind.BINARY), PredictorMatrix(np.random.default_rng(0).normal(size=(10, 3))))
    with pytest.raises(DegenerateError):
        screen(ds, ScreeningConfig("logistic"))


def test_family_and_test_applicability():
    ds = generate_null_dataset(SimDesign("poisson", (2.0,), 50, 4, 1, 0), 0)
    with pytest.raises(FamilyMismatchError):
        screen(ds, ScreeningConfig("beta"))
    with pytest.raises(FamilyMismatchError, match="welch"):
        screen(ds, ScreeningConfig("poisson", "welch"))


def test_null_rejection_fraction_near_alpha():
    ds = generate_null_dataset(SimDesign("poisson", (3.0,), 2000, 1000, 1, 4), 0)
    report = screen(ds, ScreeningConfig("poisson", "score"))
    assert 0.03 <= len(report.selected) / ds.d <= 0.07


def test_planted_column_selected_first():
    ds, planted = generate_planted_dataset(SimDesign("beta", (5, 10), 500, 50, 1, 9, planted=True), 0)
    report = screen(ds, ScreeningConfig("beta", "score", selection=TopK(1)))
    assert report.selected == (planted,)


def test_serialisation_formats():
    ds = logistic_ds(d=6)
    report = screen(ds, ScreeningConfig("logistic", ("score", "welch")))
    lines = report.to_csv().splitlines()
    assert lines[0] == "index,test,statistic,pvalue,selected,error"
    assert len(lines) == 1 + 2 * 6
    record = json.loads(report.to_json())
    assert set(record["elapsed"]) == {"score", "welch"}
    assert record["config"]["tests"] == ["score", "welch"]
    assert record["null_fit"]["family"] == "logistic"
    assert len(record["outcomes"]["welch"]) == 6
    assert record["outcomes"]["welch"][0]["df"] > 0
    assert "elapsed" not in json.loads(report.to_json(timings=False))


def test_compare_with_itself():
    ds = logistic_ds()
    agreement = compare_tests(ds, ScreeningConfig("logistic", ("score", "score")))
    assert agreement.pvalue_correlation == 1.0
    assert agreement.agreement_fraction == 1.0
    assert agreement.speedup == 1.0


def test_compare_score_llr_welch():
    ds = logistic_ds(n=3000, d=100)
    agreement = compare_tests(ds, ScreeningConfig("logistic", ("score", "llr", "welch")))
    assert len(agreement.pairs) == 3
    assert agreement.pvalue_correlation > 0.999
    assert agreement.agreement_fraction >= 0.98
    assert agreement.pairs[0].slower is TestKind.LLR
    assert agreement.pvalues("welch").shape == (100,)
    record = json.loads(agreement.to_json(timings=False))
    assert "speedup" not in record["pairs"][0]
    assert agreement.to_csv().splitlines()[0] == "index,pvalue_score,pvalue_llr,pvalue_welch"


def test_compare_excludes_failed_columns():
    ds = logistic_ds(d=8)
    X = ds.predictors.data.copy()
    X[:, 0] = 3.0
    ds = Dataset(ds.response, PredictorMatrix(X))
    agreement = compare_tests(ds, ScreeningConfig("logistic", ("score", "llr")))
    assert agreement.excluded == 1


def test_compare_needs_two_tests():
    with pytest.raises(ValueError):
        compare_tests(logistic_ds(d=3), ScreeningConfig("logistic", "score"))
