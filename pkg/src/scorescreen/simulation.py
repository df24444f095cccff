"""Seeded Monte Carlo designs and the experiment driver.

Every replication draws from its own generator seeded with
``SeedSequence([seed, rep])``, so a dataset depends only on the design and
the replication index, never on execution order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .data import Dataset, PredictorMatrix, ResponseVector
from .exceptions import DomainError, ScreeningError
from .families import COMPATIBLE_KINDS, RegressionFamily
from .score import TestKind
from .screening import ScreeningConfig, pvalue_agreement, screen

# -- generators ------------------------------------------------------------


def _check(cond, message):
    if not cond:
        raise DomainError(message)


def standard_normal(rng, size):
    return rng.standard_normal(size)


def bernoulli(rng, p, size):
    _check(0.0 <= p <= 1.0, f"bernoulli p must lie in [0, 1], got {p!r}")
    return (rng.random(size) < p).astype(float)


def poisson(rng, lam, size):
    _check(lam > 0, f"poisson mean must be positive, got {lam!r}")
    return rng.poisson(lam, size).astype(float)


def gamma(rng, shape, rate, size):
    """Gamma with mean ``shape / rate``."""
    _check(shape > 0 and rate > 0, f"gamma needs shape, rate > 0, got {shape!r}, {rate!r}")
    return rng.standard_gamma(shape, size) / rate


def beta(rng, a, b, size):
    """Beta variates as ``G_a / (G_a + G_b)``."""
    _check(a > 0 and b > 0, f"beta needs a, b > 0, got {a!r}, {b!r}")
    ga = rng.standard_gamma(a, size)
    gb = rng.standard_gamma(b, size)
    return ga / (ga + gb)


def weibull(rng, shape, scale, size):
    _check(shape > 0 and scale > 0, f"weibull needs shape, scale > 0, got {shape!r}, {scale!r}")
    return scale * rng.weibull(shape, size)


def negative_binomial(rng, r, p, size):
    """Failures before the ``r``-th success; mean ``r (1 - p) / p``."""
    _check(r > 0 and 0.0 < p <= 1.0, f"negative binomial needs r > 0, 0 < p <= 1, got {r!r}, {p!r}")
    return rng.negative_binomial(r, p, size).astype(float)


_NULL_GENERATORS = {
    RegressionFamily.LOGISTIC: (bernoulli, 1),
    RegressionFamily.POISSON: (poisson, 1),
    RegressionFamily.GAMMA: (gamma, 2),
    RegressionFamily.NEGBIN: (negative_binomial, 2),
    RegressionFamily.BETA: (beta, 2),
    RegressionFamily.WEIBULL: (weibull, 2),
}

# -- designs ---------------------------------------------------------------


@dataclass(frozen=True)
class SimDesign:
    """One simulation cell.

    Parameters
    ----------
    family : RegressionFamily or str
    params : tuple of float
        Null response parameters: ``(p,)`` logistic, ``(mean,)`` Poisson,
        ``(shape, rate)`` Gamma, ``(r, p)`` negative binomial, ``(a, b)``
        Beta, ``(shape, scale)`` Weibull.
    n, d : int
        Sample size and number of predictors.
    replications : int
    seed : int
    planted : bool
        Beta family only: one column drives ``y ~ Beta(expit(x), 1)`` and
        ``params`` then serves as the cell label.
    """

    family: RegressionFamily
    params: tuple
    n: int
    d: int
    replications: int = 10
    seed: int = 0
    planted: bool = False

    def __post_init__(self):
        family = RegressionFamily.parse(self.family)
        object.__setattr__(self, "family", family)
        params = tuple(float(v) for v in np.atleast_1d(self.params))
        object.__setattr__(self, "params", params)
        gen, arity = _NULL_GENERATORS[family]
        if len(params) != arity:
            raise DomainError(f"{family.value} design needs {arity} parameter(s), got {len(params)}")
        # validates parameter ranges
        gen(np.random.default_rng(0), *params, 1)
        if self.n < 4:
            raise DomainError(f"n must be >= 4, got {self.n}")
        if self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")
        if self.replications < 1:
            raise DomainError(f"replications must be >= 1, got {self.replications}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.planted and family is not RegressionFamily.BETA:
            raise DomainError("planted designs use the beta family")

    @property
    def label(self):
        args = ",".join(f"{v:g}" for v in self.params)
        return f"{self.family.value}({args})" + ("-planted" if self.planted else "")

    def to_dict(self):
        return {
            "family": self.family.value,
            "params": list(self.params),
            "n": self.n,
            "d": self.d,
            "replications": self.replications,
            "seed": self.seed,
            "planted": self.planted,
        }


def replication_rng(design, rep):
    return np.random.default_rng(np.random.SeedSequence([design.seed, rep]))


def _predictors(rng, n, d):
    # drawing (d, n) and transposing yields Fortran order without a copy
    X = rng.standard_normal((d, n)).T
    return PredictorMatrix(X, copy=False)


def generate_null_dataset(design: SimDesign, rep: int) -> Dataset:
    """Response from the family's null, predictors i.i.d. standard normal."""
    rng = replication_rng(design, rep)
    gen, _ = _NULL_GENERATORS[design.family]
    y = gen(rng, *design.params, design.n)
    response = ResponseVector(y, COMPATIBLE_KINDS[design.family])
    return Dataset(response, _predictors(rng, design.n, design.d), meta={"rep": rep, **design.to_dict()})


def generate_planted_dataset(design: SimDesign, rep: int):
    """Dataset where one uniformly chosen column ``i`` drives
    ``y ~ Beta(1 / (1 + exp(-x_i)), 1)``; returns ``(dataset, i)``."""
    if design.family is not RegressionFamily.BETA:
        raise DomainError("planted datasets use the beta family")
    rng = replication_rng(design, rep)
    planted = int(rng.integers(design.d))
    pm = _predictors(rng, design.n, design.d)
    a = 1.0 / (1.0 + np.exp(-pm.data[:, planted]))
    ga = rng.standard_gamma(a)
    gb = rng.standard_gamma(1.0, design.n)
    y = ga / (ga + gb)
    # keep the response strictly inside (0, 1) at double precision
    y = np.clip(y, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    response = ResponseVector(y, COMPATIBLE_KINDS[design.family])
    return Dataset(response, pm, meta={"rep": rep, "planted": planted, **design.to_dict()}), planted


# -- experiments -----------------------------------------------------------

_ROW_FIELDS = (
    "design",
    "n",
    "d",
    "replications",
    "test",
    "type_I_error",
    "detection_rate",
    "reference",
    "pvalue_correlation",
    "agreement",
    "errors",
    "mean_seconds",
    "speedup",
)
_TIMING_FIELDS = ("mean_seconds", "speedup")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


@dataclass
class MetricsTable:
    """Replication-averaged metrics, one row per (design, n, test).

    ``pvalues`` keeps the pooled p-values of every test (keyed by
    ``(label, n, test)``) for calibration checks; it is not serialized.
    """

    rows: list = field(default_factory=list)
    designs: list = field(default_factory=list)
    pvalues: dict = field(default_factory=dict, repr=False)

    def extend(self, other):
        self.rows.extend(other.rows)
        self.designs.extend(other.designs)
        self.pvalues.update(other.pvalues)
        return self

    def row(self, test, design=None, n=None):
        for r in self.rows:
            if r["test"] == TestKind.parse(test).value and (design is None or r["design"] == design) and (
                n is None or r["n"] == n
            ):
                return r
        raise KeyError((test, design, n))

    def to_csv(self, timings=True):
        fields = [f for f in _ROW_FIELDS if timings or f not in _TIMING_FIELDS]
        lines = [",".join(fields)]
        for r in self.rows:
            lines.append(",".join(_fmt(r.get(f)) for f in fields))
        return "\n".join(lines) + "\n"

    def to_dict(self, timings=True):
        def clean(r):
            out = {}
            for k in _ROW_FIELDS:
                if not timings and k in _TIMING_FIELDS:
                    continue
                v = r.get(k)
                out[k] = None if isinstance(v, float) and math.isnan(v) else v
            return out

        return {"version": __version__, "designs": list(self.designs), "rows": [clean(r) for r in self.rows]}

    def to_json(self, timings=True):
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n"


def _reference(tests):
    return TestKind.LLR if TestKind.LLR in tests else tests[0]


def run_experiment(design: SimDesign, tests=(TestKind.SCORE, TestKind.LLR), alpha=0.05, threads=None):
    """Screen every replication with every test and average the metrics.

    Type I error is the fraction of columns with ``p <= alpha`` (planted
    designs count only the null columns); detection rate, for planted
    designs, is the fraction of replications in which the planted column
    has the smallest p-value. Correlation and agreement are against the
    reference test (the likelihood ratio when requested, else the first).

    Raises
    ------
    ScreeningError
        Re-raised with the failing replication index in the message.
    """
    tests = tuple(dict.fromkeys(TestKind.parse(t) for t in tests))
    ref = _reference(tests)
    cfg = ScreeningConfig(design.family, tests, alpha=alpha, threads=threads)
    reject = {t: [] for t in tests}
    detect = {t: [] for t in tests}
    corr = {t: [] for t in tests}
    agree = {t: [] for t in tests}
    seconds = {t: [] for t in tests}
    errors = {t: 0 for t in tests}
    pooled = {t: [] for t in tests}
    for rep in range(design.replications):
        try:
            if design.planted:
                ds, planted = generate_planted_dataset(design, rep)
            else:
                ds, planted = generate_null_dataset(design, rep), None
            report = screen(ds, cfg)
        except ScreeningError as exc:
            raise type(exc)(f"replication {rep}: {exc}") from exc
        for t in tests:
            p = report.pvalues(t)
            errors[t] += int(np.isnan(p).sum())
            null_p = p if planted is None else np.delete(p, planted)
            null_p = null_p[np.isfinite(null_p)]
            pooled[t].append(null_p)
            reject[t].append(float(np.mean(null_p <= alpha)) if null_p.size else math.nan)
            if planted is not None:
                score = np.where(np.isnan(p), np.inf, p)
                stat = np.abs(np.nan_to_num(report.statistics(t), nan=0.0))
                first = int(np.lexsort((np.arange(p.size), -stat, score))[0])
                detect[t].append(float(first == planted))
            seconds[t].append(report.elapsed[t])
            if t is not ref:
                c, a, _ = pvalue_agreement(report.pvalues(ref), p, alpha)
                corr[t].append(c)
                agree[t].append(a)

    table = MetricsTable(designs=[design.to_dict()])
    ref_seconds = float(np.mean(seconds[ref]))
    for t in tests:
        mean_seconds = float(np.mean(seconds[t]))
        table.rows.append(
            {
                "design": design.label,
                "n": design.n,
                "d": design.d,
                "replications": design.replications,
                "test": t.value,
                "type_I_error": float(np.mean(reject[t])),
                "detection_rate": float(np.mean(detect[t])) if design.planted else math.nan,
                "reference": ref.value,
                "pvalue_correlation": float(np.mean(corr[t])) if corr[t] else math.nan,
                "agreement": float(np.mean(agree[t])) if agree[t] else math.nan,
                "errors": errors[t],
                "mean_seconds": mean_seconds,
                "speedup": ref_seconds / mean_seconds if mean_seconds > 0 else math.nan,
            }
        )
        table.pvalues[(design.label, design.n, t.value)] = np.concatenate(pooled[t])
    return table


# -- presets ---------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    """A published design at desk scale."""

    family: RegressionFamily
    params: tuple
    tests: tuple
    n: tuple
    d: int
    replications: int
    planted: bool = False


PRESETS = {
    "table2": Preset(
        RegressionFamily.LOGISTIC,
        ((0.1,), (0.2,), (0.3,), (0.4,), (0.5,)),
        (TestKind.SCORE, TestKind.LLR, TestKind.WELCH),
        (20000,),
        200,
        10,
    ),
    "table3": Preset(
        RegressionFamily.LOGISTIC,
        ((0.1,), (0.2,), (0.3,), (0.4,), (0.5,)),
        (TestKind.SCORE, TestKind.LLR, TestKind.WELCH),
        (20000,),
        200,
        10,
    ),
    "table6": Preset(
        RegressionFamily.GAMMA,
        ((1.0, 5.0), (5.0, 5.0)),
        (TestKind.SCORE, TestKind.LLR),
        (50000,),
        100,
        10,
    ),
    "table8": Preset(
        RegressionFamily.BETA,
        ((5.0, 10.0), (0.5, 0.5), (10.0, 5.0)),
        (TestKind.SCORE, TestKind.PEARSON),
        (100, 500),
        100,
        20,
        planted=True,
    ),
}


def preset_designs(name, n=None, d=None, replications=None, seed=0):
    """Expand a preset into :class:`SimDesign` cells; ``n`` may be a sequence."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    pre = PRESETS[name]
    ns = pre.n if n is None else tuple(np.atleast_1d(n).tolist())
    designs = []
    for i, params in enumerate(pre.params):
        for nn in ns:
            designs.append(
                SimDesign(
                    pre.family,
                    params,
                    int(nn),
                    pre.d if d is None else d,
                    pre.replications if replications is None else replications,
                    # distinct stream per cell
                    int(np.random.SeedSequence([seed, i, int(nn)]).generate_state(1, np.uint64)[0]),
                    pre.planted,
                )
            )
    return designs


def run_preset(name, n=None, d=None, replications=None, seed=0, tests=None, alpha=0.05, threads=None):
    table = MetricsTable()
    for design in preset_designs(name, n, d, replications, seed):
        table.extend(run_experiment(design, tests or PRESETS[name].tests, alpha, threads))
    return table


__all__ = [
    "standard_normal",
    "bernoulli",
    "poisson",
    "gamma",
    "beta",
    "weibull",
    "negative_binomial",
    "SimDesign",
    "MetricsTable",
    "generate_null_dataset",
    "generate_planted_dataset",
    "run_experiment",
    "PRESETS",
    "preset_designs",
    "run_preset",
]
