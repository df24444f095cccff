import json

import numpy as np
import pytest

from scorescreen.cli import THREADS_ENV, main, resolve_threads


@pytest.fixture
def dataset(tmp_path):
    rng = np.random.default_rng(1)
    n = 300
    X = rng.standard_normal((n, 6))
    y = (rng.random(n) < 1 / (1 + np.exp(-X[:, 2]))).astype(int)
    counts = rng.poisson(2.0, n)
    path = tmp_path / "d.csv"
    with path.open("w") as fh:
        fh.write("y,count," + ",".join(f"g{j}" for j in range(6)) + "\n")
        for i in range(n):
            fh.write(f"{y[i]},{counts[i]}," + ",".join(f"{v:.6f}" for v in X[i]) + "\n")
    return path


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_filter_csv(dataset, capsys):
    code = main(["filter", "--input", str(dataset), "--response", "y", "--family", "logistic", "--test", "score", "--alpha", "0.05"])
    out = capsys.readouterr().out
    assert code == 0
    header = json.loads(out.splitlines()[0][2:])
    assert header["version"] and header["family"] == "logistic" and header["n"] == 300
    rows = body(out)
    assert rows[0] == "index,test,statistic,pvalue,selected,error"
    assert len(rows) == 1 + 7
    selected = [r.split(",")[0] for r in rows[1:] if r.split(",")[4] == "true"]
    assert "3" in selected  # g2 is column 3 once the response is removed


def test_filter_json_to_file(dataset, tmp_path):
    out = tmp_path / "r.json"
    code = main(["filter", "-i", str(dataset), "--response", "y", "--family", "logistic", "--topk", "2", "--format", "json", "-o", str(out)])
    assert code == 0
    record = json.loads(out.read_text())
    assert len(record["selected"]) == 2
    assert record["header"]["topk"] == 2
    assert "elapsed" in record
    assert not list(tmp_path.glob(".*.tmp"))


def test_kind_mismatch_exit_2(dataset, tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["filter", "-i", str(dataset), "--response", "y", "--family", "beta", "-o", str(out)])
    assert code == 2
    err = capsys.readouterr().err
    assert "beta" in err and len(err.strip().splitlines()) == 1
    assert not out.exists()


def test_flag_validation_before_io(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["filter", "-i", str(tmp_path / "missing.csv"), "--family", "logistic", "--topk", "0"])
    assert info.value.code == 2
    assert "--topk" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert main(["filter", "-i", str(tmp_path / "missing.csv"), "--family", "logistic"]) == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    path.write_text("y,a\n" + "".join(f"3,{i}\n" for i in range(10)))
    assert main(["filter", "-i", str(path), "--family", "gamma"]) == 3
    assert "numerical" in capsys.readouterr().err


def test_compare(dataset, capsys):
    code = main(["compare", "-i", str(dataset), "--response", "y", "--family", "logistic", "--tests", "score,welch"])
    out = capsys.readouterr().out
    assert code == 0
    pair = json.loads(out.splitlines()[1][len("# pair "):])
    assert pair["first"] == "score" and pair["second"] == "welch"
    rows = body(out)
    assert rows[0] == "index,pvalue_score,pvalue_welch"
    assert all(r.count(",") == 2 and "" not in r.split(",") for r in rows[1:])


def test_compare_welch_on_counts_exit_2(dataset):
    code = main(["compare", "-i", str(dataset), "--response", "count", "--family", "poisson", "--tests", "score,welch"])
    assert code == 2


def test_compare_needs_two_tests(dataset):
    assert main(["compare", "-i", str(dataset), "--response", "y", "--family", "logistic", "--tests", "score"]) == 2


def test_simulate_repeatable(tmp_path):
    args = ["simulate", "--preset", "table2", "--n", "1500", "--d", "20", "--reps", "2", "--seed", "7"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = body(a.read_text())
    assert rows[0].startswith("design,n,d,replications,test,type_I_error")
    assert len(rows) == 1 + 5 * 3


def test_simulate_bodies_match_across_threads(tmp_path):
    args = ["simulate", "--family", "gamma", "--params=5,5", "--n", "800", "--d", "70", "--reps", "2", "--seed", "3"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--threads", "1", "--format", "json", "-o", str(a)]) == 0
    assert main(args + ["--threads", "8", "--format", "json", "-o", str(b)]) == 0
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ra["header"]["threads"] == 1 and rb["header"]["threads"] == 8
    ra.pop("header"), rb.pop("header")
    assert ra == rb


def test_simulate_preset_family_mismatch():
    assert main(["simulate", "--preset", "table2", "--family", "negbin"]) == 2


def test_simulate_invalid_design():
    assert main(["simulate", "--family", "gamma", "--params=-1,2", "--n", "100", "--d", "5"]) == 2
    assert main(["simulate", "--family", "gamma", "--n", "100"]) == 2
    assert main(["simulate"]) == 2


def test_bench(capsys):
    code = main(["bench", "--n", "3000", "1000", "--d", "20"])
    out = capsys.readouterr().out
    assert code == 0
    rows = body(out)
    head = rows[0].split(",")
    recs = [dict(zip(head, r.split(","))) for r in rows[1:]]
    assert [int(r["n"]) for r in recs] == [1000, 3000]
    assert all(r["null_fits"] == "1" and r["h1_fits"] == "20" for r in recs)
    assert all(float(r["speedup"]) > 1 for r in recs)


def test_threads_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(5) == 5
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ValueError):
        resolve_threads(None)


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
