"""Fast univariate filtering with score tests for six regression families."""

__version__ = "0.1.0"

from .data import Dataset, PredictorMatrix, ResponseVector, load_csv, write_csv
from .exceptions import (
    ConvergenceError,
    DataError,
    DegenerateError,
    DomainError,
    FamilyMismatchError,
    MissingValueError,
    NumericalError,
    ParseError,
    SampleSizeError,
    ScreeningError,
    SeparationError,
    StructureError,
)
from .families import RegressionFamily, ResponseKind
from .llr import fit_univariate, llr_statistic
from .null_fit import NullFit, fit_null
from .score import TestKind, TestOutcome, pearson_z, score_statistic, welch_t
from .screening import (
    AgreementReport,
    ScreeningConfig,
    ScreeningReport,
    Threshold,
    TopK,
    compare_tests,
    screen,
)
from .simulation import MetricsTable, SimDesign, run_experiment, run_preset
from .estimator import UnivariateFilter, univariate_scores

__all__ = [
    "__version__",
    "Dataset",
    "PredictorMatrix",
    "ResponseVector",
    "load_csv",
    "write_csv",
    "RegressionFamily",
    "ResponseKind",
    "NullFit",
    "fit_null",
    "TestKind",
    "TestOutcome",
    "score_statistic",
    "pearson_z",
    "welch_t",
    "fit_univariate",
    "llr_statistic",
    "ScreeningConfig",
    "ScreeningReport",
    "AgreementReport",
    "Threshold",
    "TopK",
    "screen",
    "compare_tests",
    "SimDesign",
    "MetricsTable",
    "run_experiment",
    "run_preset",
    "UnivariateFilter",
    "univariate_scores",
    "ScreeningError",
    "DataError",
    "ParseError",
    "StructureError",
    "MissingValueError",
    "FamilyMismatchError",
    "SampleSizeError",
    "NumericalError",
    "DomainError",
    "DegenerateError",
    "ConvergenceError",
    "SeparationError",
]
