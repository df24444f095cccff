"""Batch univariate filtering over every predictor column.

The intercept-only model is fitted once; each requested test is then swept
over fixed blocks of :data:`BLOCK_COLUMNS` columns on a thread pool. Block
boundaries never depend on the thread count, so results are bit-identical
for any number of workers.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .data import Dataset, default_top_k, validate_for_family
from .exceptions import FamilyMismatchError, StructureError
from .families import RegressionFamily
from .llr import llr_batch
from .null_fit import NullFit, fit_null
from .score import TestKind, TestOutcome, pearson_batch, score_batch, welch_batch

BLOCK_COLUMNS = 64


@dataclass(frozen=True)
class Threshold:
    """Keep every column with ``p <= alpha``."""

    alpha: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")


@dataclass(frozen=True)
class TopK:
    """Keep the ``k`` most significant columns; ``k=None`` means ``floor(n / ln n)``."""

    k: int | None = None

    def __post_init__(self):
        if self.k is not None and (int(self.k) != self.k or self.k < 1):
            raise ValueError(f"k must be a positive integer, got {self.k!r}")

    def resolve(self, n):
        return default_top_k(n) if self.k is None else int(self.k)


def default_threads():
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ScreeningConfig:
    """What to compute and what to keep.

    Parameters
    ----------
    family : RegressionFamily or str
    test : TestKind, str or sequence of them
        The first entry drives selection; the others are computed alongside
        (for :func:`compare_tests`).
    alpha : float
        Significance level for rejections and the default threshold rule.
    selection : Threshold or TopK, optional
        Defaults to ``Threshold(alpha)``.
    threads : int, optional
        Worker count; defaults to the number of CPUs.
    """

    family: RegressionFamily
    test: tuple = (TestKind.SCORE,)
    alpha: float = 0.05
    selection: Threshold | TopK | None = None
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", RegressionFamily.parse(self.family))
        tests = self.test
        if isinstance(tests, (str, TestKind)):
            tests = (tests,)
        tests = tuple(TestKind.parse(t) for t in tests)
        if not tests:
            raise ValueError("at least one test is required")
        object.__setattr__(self, "test", tests)
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.selection is None:
            object.__setattr__(self, "selection", Threshold(self.alpha))
        elif not isinstance(self.selection, (Threshold, TopK)):
            raise TypeError(f"selection must be Threshold or TopK, got {self.selection!r}")
        if self.threads is not None and self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads!r}")

    @property
    def tests(self):
        """Distinct tests in request order."""
        return tuple(dict.fromkeys(self.test))

    @property
    def primary(self):
        return self.test[0]

    def to_dict(self, execution=True):
        """Plain-dict form; ``execution=False`` drops the thread count."""
        sel = self.selection
        if isinstance(sel, TopK):
            selection = {"rule": "topk", "k": sel.k}
        else:
            selection = {"rule": "threshold", "alpha": sel.alpha}
        return {
            "family": self.family.value,
            "tests": [t.value for t in self.test],
            "alpha": self.alpha,
            "selection": selection,
            **({"threads": self.threads} if execution else {}),
        }


def _finite_or_none(value):
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass
class ScreeningReport:
    """Per-column outcomes of a screen and the selected columns.

    Attributes
    ----------
    outcomes : dict
        ``TestKind -> list[TestOutcome]``, one entry per column; failed
        columns carry NaN and an ``error`` message.
    selected : tuple of int
        Selected column indices under the primary test, ordered by p-value
        for TopK and by index for Threshold.
    elapsed : dict
        Wall seconds per test. Score and likelihood-ratio timings include
        the shared null fit.
    null_fit : NullFit
    counts : dict
        Operation counts: ``null_fits`` and ``h1_fits``.
    """

    config: ScreeningConfig
    outcomes: dict
    selected: tuple
    elapsed: dict
    null_fit: NullFit
    names: tuple = ()
    counts: dict = field(default_factory=dict)

    @property
    def per_column(self):
        return self.outcomes[self.config.primary]

    def statistics(self, test=None):
        test = self.config.primary if test is None else TestKind.parse(test)
        return np.array([o.statistic for o in self.outcomes[test]])

    def pvalues(self, test=None):
        test = self.config.primary if test is None else TestKind.parse(test)
        return np.array([o.pvalue for o in self.outcomes[test]])

    def errors(self, test=None):
        test = self.config.primary if test is None else TestKind.parse(test)
        return {j: o.error for j, o in enumerate(self.outcomes[test]) if o.error}

    def to_csv(self):
        """Tabular projection: one row per (test, column)."""
        chosen = set(self.selected)
        lines = ["index,test,statistic,pvalue,selected,error"]
        for test, outs in self.outcomes.items():
            for j, o in enumerate(outs):
                stat = "" if math.isnan(o.statistic) else repr(o.statistic)
                pval = "" if math.isnan(o.pvalue) else repr(o.pvalue)
                err = (o.error or "").replace('"', "'")
                err = f'"{err}"' if err else ""
                lines.append(f"{j},{test.value},{stat},{pval},{str(j in chosen).lower()},{err}")
        return "\n".join(lines) + "\n"

    def to_dict(self, timings=True):
        record = {
            "version": __version__,
            "config": self.config.to_dict(execution=timings),
            "null_fit": self.null_fit.to_dict(),
            "counts": dict(self.counts),
            "selected": list(self.selected),
            "columns": list(self.names),
            "outcomes": {
                test.value: [
                    {
                        "statistic": _finite_or_none(o.statistic),
                        "pvalue": _finite_or_none(o.pvalue),
                        "df": None if o.df is None else _finite_or_none(o.df),
                        "error": o.error,
                    }
                    for o in outs
                ]
                for test, outs in self.outcomes.items()
            },
        }
        if timings:
            record["elapsed"] = {t.value: s for t, s in self.elapsed.items()}
        return record

    def to_json(self, timings=True):
        """Full record; ``timings=False`` leaves out wall times and the thread
        count, giving output that is byte-stable across runs."""
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n"


# -- sweeps ----------------------------------------------------------------

def _blocks(d):
    return [(lo, min(lo + BLOCK_COLUMNS, d)) for lo in range(0, d, BLOCK_COLUMNS)]


def _block_kernel(test, ds, nf):
    pm = ds.predictors
    y = ds.response.values

    def run(lo, hi):
        X = pm.data[:, lo:hi]
        if test is TestKind.SCORE:
            stat, pval, errors = score_batch(nf, X, pm.means[lo:hi], pm.variances[lo:hi])
            df = None
        elif test is TestKind.LLR:
            stat, pval, errors = llr_batch(ds.response, X, nf)
            df = None
        elif test is TestKind.PEARSON:
            stat, pval, errors, _ = pearson_batch(y, X, pm.means[lo:hi], pm.variances[lo:hi])
            df = None
        else:
            stat, pval, errors, df = welch_batch(y, X)
        return stat, pval, errors, df

    return run


def _sweep(test, ds, nf, executor):
    family = nf.family if test in (TestKind.SCORE, TestKind.LLR) else None
    if test is TestKind.WELCH:
        family = RegressionFamily.LOGISTIC
    run = _block_kernel(test, ds, nf)
    blocks = _blocks(ds.d)
    if executor is None:
        parts = [run(lo, hi) for lo, hi in blocks]
    else:
        parts = list(executor.map(lambda b: run(*b), blocks))
    outcomes = []
    for stat, pval, errors, df in parts:
        for j in range(len(stat)):
            outcomes.append(
                TestOutcome(
                    test,
                    family,
                    float(stat[j]),
                    float(pval[j]),
                    None if df is None else float(df[j]),
                    errors[j],
                )
            )
    return outcomes


def _check_applicable(test, ds):
    if test is TestKind.WELCH:
        values = ds.response.values
        if np.any((values != 0.0) & (values != 1.0)):
            raise FamilyMismatchError(
                f"welch test needs a binary response; {ds.response_name!r} is {ds.response.kind.value}"
            )


def select(outcomes, selection, n):
    """Apply a selection rule to one test's outcomes."""
    ok = [j for j, o in enumerate(outcomes) if o.ok and not math.isnan(o.pvalue)]
    if isinstance(selection, Threshold):
        return tuple(j for j in ok if outcomes[j].pvalue <= selection.alpha)
    k = selection.resolve(n)
    if not ok:
        return ()
    idx = np.array(ok)
    p = np.array([outcomes[j].pvalue for j in ok])
    s = np.array([abs(outcomes[j].statistic) for j in ok])
    # lexsort: last key is primary -> p asc, |stat| desc, index asc
    order = np.lexsort((idx, -s, p))
    return tuple(int(j) for j in idx[order[:k]])


def screen(ds: Dataset, cfg: ScreeningConfig) -> ScreeningReport:
    """Fit the null once, run every requested test on every column, select.

    Raises
    ------
    FamilyMismatchError
        The response does not suit the family, or Welch on a non-binary response.
    DegenerateError, ConvergenceError
        The null fit failed; nothing else is computed.
    """
    if not isinstance(ds, Dataset):
        raise StructureError(f"expected a Dataset, got {type(ds).__name__}")
    validate_for_family(ds, cfg.family)
    for test in cfg.tests:
        _check_applicable(test, ds)

    t0 = time.perf_counter()
    nf = fit_null(ds.response, cfg.family)
    null_seconds = time.perf_counter() - t0

    threads = cfg.threads or default_threads()
    outcomes = {}
    elapsed = {}
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 and ds.d > BLOCK_COLUMNS else None
    try:
        for test in cfg.tests:
            t0 = time.perf_counter()
            outcomes[test] = _sweep(test, ds, nf, executor)
            seconds = time.perf_counter() - t0
            if test in (TestKind.SCORE, TestKind.LLR):
                seconds += null_seconds
            elapsed[test] = seconds
    finally:
        if executor is not None:
            executor.shutdown()

    selected = select(outcomes[cfg.primary], cfg.selection, ds.n)
    counts = {"null_fits": 1, "h1_fits": ds.d if TestKind.LLR in outcomes else 0}
    return ScreeningReport(cfg, outcomes, selected, elapsed, nf, ds.predictors.names, counts)


# -- comparison ------------------------------------------------------------

@dataclass(frozen=True)
class PairAgreement:
    """Agreement metrics between two tests over the same columns.

    ``speedup`` is the wall time of the slower test over the faster one;
    ``slower`` names which one that was. ``excluded`` counts columns that
    failed under either test and were left out.
    """

    first: TestKind
    second: TestKind
    pvalue_correlation: float
    agreement_fraction: float
    speedup: float
    slower: TestKind
    excluded: int

    def to_dict(self):
        return {
            "first": self.first.value,
            "second": self.second.value,
            "pvalue_correlation": _finite_or_none(self.pvalue_correlation),
            "agreement_fraction": _finite_or_none(self.agreement_fraction),
            "speedup": _finite_or_none(self.speedup),
            "slower": self.slower.value,
            "excluded": self.excluded,
        }


def pvalue_agreement(p1, p2, alpha):
    """``(correlation, agreement, excluded)`` of two p-value vectors."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    keep = np.isfinite(p1) & np.isfinite(p2)
    excluded = int((~keep).sum())
    a, b = p1[keep], p2[keep]
    if a.size == 0:
        return math.nan, math.nan, excluded
    if np.array_equal(a, b):
        corr = 1.0
    elif a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        corr = math.nan
    else:
        corr = float(np.corrcoef(a, b)[0, 1])
    agree = float(np.mean((a <= alpha) == (b <= alpha)))
    return corr, agree, excluded


def _pair(report, first, second):
    corr, agree, excluded = pvalue_agreement(report.pvalues(first), report.pvalues(second), report.config.alpha)
    t1, t2 = report.elapsed[first], report.elapsed[second]
    slower = first if t1 >= t2 else second
    fast = min(t1, t2)
    speedup = max(t1, t2) / fast if fast > 0 else math.inf
    return PairAgreement(first, second, corr, agree, speedup, slower, excluded)


@dataclass
class AgreementReport:
    """Pairwise agreement of two or more tests on one dataset.

    The scalar properties refer to the first pair (the first two requested
    tests); ``pairs`` holds every combination.
    """

    pairs: list
    report: ScreeningReport

    @property
    def pvalue_correlation(self):
        return self.pairs[0].pvalue_correlation

    @property
    def agreement_fraction(self):
        return self.pairs[0].agreement_fraction

    @property
    def speedup(self):
        return self.pairs[0].speedup

    @property
    def excluded(self):
        return self.pairs[0].excluded

    def pvalues(self, test):
        return self.report.pvalues(test)

    def to_csv(self):
        """Per-column p-values of every test, one column per test."""
        tests = list(self.report.outcomes)
        lines = ["index," + ",".join(f"pvalue_{t.value}" for t in tests)]
        vectors = [self.report.pvalues(t) for t in tests]
        for j in range(len(vectors[0])):
            cells = ["" if math.isnan(v[j]) else repr(float(v[j])) for v in vectors]
            lines.append(f"{j}," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def to_dict(self, timings=True):
        pairs = [p.to_dict() for p in self.pairs]
        if not timings:
            for p in pairs:
                p.pop("speedup")
                p.pop("slower")
        return {
            "version": __version__,
            "config": self.report.config.to_dict(execution=timings),
            "pairs": pairs,
            "pvalues": {
                t.value: [_finite_or_none(v) for v in self.report.pvalues(t)] for t in self.report.outcomes
            },
            **({"elapsed": {t.value: s for t, s in self.report.elapsed.items()}} if timings else {}),
        }

    def to_json(self, timings=True):
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n"


def compare_tests(ds: Dataset, cfg: ScreeningConfig) -> AgreementReport:
    """Correlation, agreement and speed-up between the requested tests.

    ``cfg.test`` must name at least two tests (a test may be compared with
    itself).
    """
    if len(cfg.test) < 2:
        raise ValueError("compare_tests needs at least two tests")
    report = screen(ds, cfg)
    requested = cfg.test
    pairs = [
        _pair(report, requested[i], requested[j])
        for i in range(len(requested))
        for j in range(i + 1, len(requested))
    ]
    return AgreementReport(pairs, report)


__all__ = [
    "BLOCK_COLUMNS",
    "Threshold",
    "TopK",
    "ScreeningConfig",
    "ScreeningReport",
    "PairAgreement",
    "AgreementReport",
    "screen",
    "select",
    "compare_tests",
    "pvalue_agreement",
]
