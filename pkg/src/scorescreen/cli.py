"""Command-line front end.

Subcommands: ``filter``, ``compare``, ``simulate`` and ``bench``. Exit codes
are 0 on success, 2 for bad input (flags, files, data) and 3 for numerical
failures. Output is written to a temporary file and renamed into place, so
a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path


from . import __version__
from .data import load_csv
from .exceptions import DataError, DomainError, NumericalError, ScreeningError
from .families import RegressionFamily
from .score import TestKind
from .screening import ScreeningConfig, Threshold, TopK, compare_tests, default_threads, screen
from .simulation import PRESETS, MetricsTable, SimDesign, generate_null_dataset, preset_designs, run_experiment

THREADS_ENV = "SCORESCREEN_THREADS"

EXIT_OK = 0
EXIT_DATA = 2
EXIT_NUMERIC = 3


# -- flag types ------------------------------------------------------------

def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _alpha(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {value}")
    return value


def _family(text):
    try:
        return RegressionFamily.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _tests(text):
    try:
        return [TestKind.parse(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _floats(text):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- parser ----------------------------------------------------------------

def _add_output(p, timings_default):
    p.add_argument("--output", "-o", help="output path (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument(
        "--timings",
        action=argparse.BooleanOptionalAction,
        default=timings_default,
        help="include wall-clock timings (off gives byte-reproducible output)",
    )
    p.add_argument("--threads", type=_positive_int, help=f"worker threads (default: ${THREADS_ENV} or all cores)")


def _add_input(p):
    p.add_argument("--input", "-i", required=True, help="CSV or TSV file")
    p.add_argument("--response", default="0", help="response column name or 0-based index (default: 0)")
    p.add_argument("--delimiter", choices=(",", "tab"), help="field separator (default: detected)")
    p.add_argument("--family", type=_family, required=True, help=", ".join(f.value for f in RegressionFamily))
    p.add_argument("--alpha", type=_alpha, default=0.05)


def build_parser():
    parser = argparse.ArgumentParser(prog="scorescreen", description="Univariate filtering with score tests.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="screen every predictor of a dataset")
    _add_input(p)
    p.add_argument("--test", type=TestKind.parse, default=TestKind.SCORE, help="score, llr, pearson or welch")
    p.add_argument("--topk", type=_positive_int, help="keep the k most significant columns instead of p <= alpha")
    p.add_argument("--topk-default", action="store_true", help="keep floor(n / ln n) columns")
    _add_output(p, timings_default=True)

    p = sub.add_parser("compare", help="agreement of two or more tests on a dataset")
    _add_input(p)
    p.add_argument("--tests", type=_tests, default=[TestKind.SCORE, TestKind.LLR], help="e.g. score,llr")
    _add_output(p, timings_default=True)

    p = sub.add_parser("simulate", help="Monte Carlo type I error / agreement / detection tables")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--family", type=_family)
    p.add_argument("--params", type=_floats, help="null parameters, e.g. 5,5 for gamma shape,rate")
    p.add_argument("--planted", action="store_true", help="beta planted-variable design")
    p.add_argument("--n", type=_positive_int, nargs="+")
    p.add_argument("--d", type=_positive_int)
    p.add_argument("--reps", type=_positive_int)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--tests", type=_tests)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    _add_output(p, timings_default=False)

    p = sub.add_parser("bench", help="score vs likelihood-ratio wall time over an (n, d) grid")
    p.add_argument("--family", type=_family, default=RegressionFamily.LOGISTIC)
    p.add_argument("--params", type=_floats, help="null parameters (default: a family-specific choice)")
    p.add_argument("--n", type=_positive_int, nargs="+", default=[10000, 100000])
    p.add_argument("--d", type=_positive_int, nargs="+", default=[500])
    p.add_argument("--seed", type=_seed, default=0)
    _add_output(p, timings_default=True)
    return parser


# -- helpers ---------------------------------------------------------------

def resolve_threads(flag):
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return value
    return default_threads()


def _header(args, extra=None):
    config = {"command": args.command, "version": __version__}
    for key, value in sorted(vars(args).items()):
        if key in ("command", "output"):
            continue
        config[key] = _plain(value)
    config.update(extra or {})
    return config


def _plain(value):
    if isinstance(value, (RegressionFamily, TestKind)):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _render(header, body_csv, body_json, fmt):
    if fmt == "json":
        return json.dumps({"header": header, **body_json}, indent=2, sort_keys=True) + "\n"
    return "# " + json.dumps(header, sort_keys=True) + "\n" + body_csv


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(args, text):
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def _load(args):
    delimiter = "\t" if args.delimiter == "tab" else args.delimiter
    return load_csv(args.input, response_column=args.response, delimiter=delimiter)


# -- subcommands -----------------------------------------------------------

def cmd_filter(args):
    if args.topk is not None and args.topk_default:
        raise ValueError("--topk and --topk-default are mutually exclusive")
    threads = resolve_threads(args.threads)
    ds = _load(args)
    if args.topk is not None or args.topk_default:
        selection = TopK(args.topk)
    else:
        selection = Threshold(args.alpha)
    cfg = ScreeningConfig(args.family, args.test, args.alpha, selection, threads)
    report = screen(ds, cfg)
    header = _header(args, {"threads": threads, "n": ds.n, "d": ds.d})
    _emit(args, _render(header, report.to_csv(), report.to_dict(args.timings), args.format))
    return EXIT_OK


def cmd_compare(args):
    if len(args.tests) < 2:
        raise ValueError("--tests needs at least two tests")
    threads = resolve_threads(args.threads)
    ds = _load(args)
    agreement = compare_tests(ds, ScreeningConfig(args.family, args.tests, args.alpha, threads=threads))
    header = _header(args, {"threads": threads, "n": ds.n, "d": ds.d})
    lines = []
    for pair in agreement.pairs:
        item = pair.to_dict()
        if not args.timings:
            item.pop("speedup")
            item.pop("slower")
        lines.append("# pair " + json.dumps(item, sort_keys=True))
    body_csv = "\n".join(lines) + "\n" + agreement.to_csv()
    _emit(args, _render(header, body_csv, agreement.to_dict(args.timings), args.format))
    return EXIT_OK


def _design_params(family, params):
    if params is not None:
        return params
    defaults = {
        RegressionFamily.LOGISTIC: (0.5,),
        RegressionFamily.POISSON: (2.0,),
        RegressionFamily.GAMMA: (5.0, 5.0),
        RegressionFamily.NEGBIN: (2.0, 0.3),
        RegressionFamily.BETA: (5.0, 10.0),
        RegressionFamily.WEIBULL: (1.5, 1.0),
    }
    return defaults[family]


def _checked(build, *args):
    """Build a design, reporting invalid parameters as bad input."""
    try:
        return build(*args)
    except DomainError as exc:
        raise ValueError(f"invalid design: {exc}") from None


def cmd_simulate(args):
    threads = resolve_threads(args.threads)
    if args.preset:
        preset = PRESETS[args.preset]
        if args.family is not None and args.family is not preset.family:
            raise ValueError(f"preset {args.preset} is a {preset.family.value} design, not {args.family.value}")
        if args.params is not None or args.planted:
            raise ValueError("--params and --planted cannot be combined with --preset")
        designs = _checked(preset_designs, args.preset, args.n, args.d, args.reps, args.seed)
        tests = args.tests or preset.tests
    else:
        if args.family is None:
            raise ValueError("simulate needs --preset or --family")
        if not args.n or args.d is None:
            raise ValueError("simulate without a preset needs --n and --d")
        tests = args.tests or [TestKind.SCORE, TestKind.LLR]
        params = _design_params(args.family, args.params)
        designs = [
            _checked(SimDesign, args.family, params, n, args.d, args.reps or 10, args.seed, args.planted)
            for n in args.n
        ]
    table = MetricsTable()
    for design in designs:
        table.extend(run_experiment(design, tests, args.alpha, threads))
    header = _header(args, {"threads": threads})
    _emit(args, _render(header, table.to_csv(args.timings), table.to_dict(args.timings), args.format))
    return EXIT_OK


_BENCH_FIELDS = ("family", "n", "d", "score_seconds", "llr_seconds", "speedup", "null_fits", "h1_fits", "llr_errors")


def cmd_bench(args):
    threads = resolve_threads(args.threads)
    rows = []
    cfg = ScreeningConfig(args.family, (TestKind.SCORE, TestKind.LLR), threads=threads)
    params = _design_params(args.family, args.params)
    for n in sorted(args.n):
        for d in sorted(args.d):
            ds = generate_null_dataset(_checked(SimDesign, args.family, params, n, d, 1, args.seed), 0)
            t0 = time.perf_counter()
            report = screen(ds, cfg)
            wall = time.perf_counter() - t0
            score_s = report.elapsed[TestKind.SCORE]
            llr_s = report.elapsed[TestKind.LLR]
            row = {
                "family": args.family.value,
                "n": n,
                "d": d,
                "null_fits": report.counts["null_fits"],
                "h1_fits": report.counts["h1_fits"],
                "llr_errors": len(report.errors(TestKind.LLR)),
            }
            if args.timings:
                row.update(score_seconds=score_s, llr_seconds=llr_s, speedup=llr_s / score_s, wall_seconds=wall)
            rows.append(row)
    fields = [f for f in _BENCH_FIELDS if args.timings or f not in ("score_seconds", "llr_seconds", "speedup")]
    body_csv = ",".join(fields) + "\n" + "".join(",".join(str(r[f]) for f in fields) + "\n" for r in rows)
    header = _header(args, {"threads": threads})
    _emit(args, _render(header, body_csv, {"rows": rows}, args.format))
    return EXIT_OK


COMMANDS = {"filter": cmd_filter, "compare": cmd_compare, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # flag errors exit 2 before any I/O
    try:
        return COMMANDS[args.command](args)
    except (DataError, ValueError, KeyError, OSError) as exc:
        if isinstance(exc, NumericalError):
            print(f"scorescreen: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"scorescreen: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ScreeningError, ArithmeticError) as exc:
        print(f"scorescreen: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
