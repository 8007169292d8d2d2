import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from lds_spectra.cli import (
    ExperimentConfig,
    ResultTable,
    UsageError,
    fmt,
    main,
    read_series,
)


def run(*args):
    return main([str(a) for a in args])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def files_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "timings.csv"}


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--clusters", 2, "--systems", 10, "--n", 2, "--len", 1000,
               "--seed", 7, "--out", d) == 0
    return d


# ---------------------------------------------------------------- simulate

def test_simulate_example(sim):
    for name in ("series.csv", "labels.csv", "spectra.csv"):
        assert (sim / name).exists()
    labels = rows(sim / "labels.csv")
    assert len(labels) == 10
    assert {r["label"] for r in labels} == {"0", "1"}
    assert len(rows(sim / "spectra.csv")) == 20


def test_simulate_byte_identical(sim, tmp_path):
    assert run("simulate", "--clusters", 2, "--systems", 10, "--n", 2, "--len", 1000,
               "--seed", 7, "--out", tmp_path) == 0
    assert files_bytes(sim) == files_bytes(tmp_path)


def test_simulate_too_many_clusters(tmp_path, capsys):
    assert run("simulate", "--clusters", 5, "--systems", 3, "--out", tmp_path) == 3
    assert "5 clusters requested for 3 systems" in capsys.readouterr().err


def test_lf_line_endings(sim):
    data = (sim / "series.csv").read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")
    assert data.startswith(b"series_id,t,channel,value\n")


# ---------------------------------------------------------------- fit / eigs / cluster

def test_fit_round_trip(sim, tmp_path):
    out = tmp_path / "fits.csv"
    assert run("fit", "--series", sim / "series.csv", "--n", 2, "--out", out) == 0
    fits = rows(out)
    assert len(fits) == 10
    assert list(fits[0]) == ["series_id", "method", "order", "rows_used", "iterations",
                             "intercept", "phi_1", "phi_2", "theta_1", "theta_2"]
    assert all(r["iterations"] == "3" and r["rows_used"] == "998" for r in fits)


def test_eigs_columns(sim, tmp_path):
    out = tmp_path / "eigs.csv"
    assert run("eigs", "--series", sim / "series.csv", "--out", out) == 0
    table = rows(out)
    assert len(table) == 20
    assert list(table[0]) == ["series_id", "re", "im", "cond_lower", "cond_upper"]
    for r in table:
        if r["cond_lower"]:
            assert float(r["cond_lower"]) <= float(r["cond_upper"])


def test_eigs_from_fits(tmp_path):
    fits = tmp_path / "fits.csv"
    fits.write_text("series_id,order,phi_1,phi_2\na,2,1.0,-0.25\nb,2,1.4,-0.45\n")
    out = tmp_path / "eigs.csv"
    assert run("eigs", "--fits", fits, "--out", out) == 0
    table = rows(out)
    # the double root has no condition bounds: empty cells
    assert [r["cond_lower"] for r in table[:2]] == ["", ""]
    assert sorted(float(r["re"]) for r in table[2:]) == pytest.approx([0.5, 0.9])


def test_cluster_metrics(sim, tmp_path):
    out, met = tmp_path / "a.csv", tmp_path / "m.json"
    assert run("cluster", "--series", sim / "series.csv", "--clusters", 2,
               "--labels", sim / "labels.csv", "--out", out, "--metrics", met) == 0
    doc = json.loads(met.read_text())
    assert {"ami", "ari", "v_measure", "inertia"} <= set(doc)
    assert -1 <= doc["ari"] <= 1 and doc["ami"] <= 1
    assert len(rows(out)) == 10


def test_cluster_missing_label(sim, tmp_path):
    lab = tmp_path / "labels.csv"
    lab.write_text("series_id,label\n0,1\n")
    assert run("cluster", "--series", sim / "series.csv", "--labels", lab,
               "--out", tmp_path / "a.csv", "--metrics", tmp_path / "m.json") == 3


# ---------------------------------------------------------------- ingestion

def test_missing_cells(tmp_path):
    y = 0.7 ** np.arange(60) + 0.01 * np.random.default_rng(0).standard_normal(60)
    lines = ["series_id,t,channel,value"]
    for t, v in enumerate(y):
        if t == 30:
            lines.append(f"s,{t},0,")
        elif t != 40:
            # t = 40 is absent from the file altogether
            lines.append(f"s,{t},0,{float(v)!r}")
    path = tmp_path / "y.csv"
    path.write_text("\n".join(lines) + "\n")
    (s,) = read_series(path)
    assert np.isnan(s.outputs[30, 0]) and np.isnan(s.outputs[40, 0])
    assert np.isfinite(s.outputs).sum() == 58
    out = tmp_path / "fits.csv"
    assert run("fit", "--series", path, "--n", 1, "--out", out) == 0
    # rows t = 1..59 minus those touching t = 30 or t = 40
    assert rows(out)[0]["rows_used"] == str(59 - 4)


def test_inputs_companion_file(tmp_path):
    assert run("simulate", "--systems", 2, "--n", 2, "--len", 500, "--observe-inputs",
               "--seed", 3, "--out", tmp_path) == 0
    assert (tmp_path / "series_inputs.csv").exists()
    series = read_series(tmp_path / "series.csv")
    assert all(s.inputs is not None and s.inputs.shape == (500, 1) for s in series)
    assert run("fit", "--series", tmp_path / "series.csv", "--out", tmp_path / "f.csv") == 0


def test_bad_csv_header(tmp_path):
    path = tmp_path / "y.csv"
    path.write_text("id,value\n1,2\n")
    assert run("fit", "--series", path, "--out", tmp_path / "f.csv") == 3


def test_missing_file(tmp_path):
    assert run("fit", "--series", tmp_path / "nope.csv", "--out", tmp_path / "f.csv") == 3


def test_constant_series_is_numerical_failure(tmp_path):
    path = tmp_path / "y.csv"
    path.write_text("series_id,t,channel,value\n" +
                    "".join(f"c,{t},0,1.5\n" for t in range(100)))
    assert run("fit", "--series", path, "--n", 1, "--out", tmp_path / "f.csv") == 4


# ---------------------------------------------------------------- config

def test_config_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"n": 3, "alpha": 0.5}))
    cfg = ExperimentConfig.resolve("fit", {"n": 4}, conf)
    assert cfg["n"] == 4 and cfg["alpha"] == 0.5 and cfg["residual_scheme"] == "staggered"
    assert ExperimentConfig.resolve("fit", {}, None)["n"] == 2


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(UsageError):
        ExperimentConfig.resolve("fit", {}, conf)
    assert run("fit", "--config", conf, "--series", "x.csv") == 2


def test_config_range(tmp_path):
    assert run("simulate", "--n", 0, "--out", tmp_path) == 2
    assert run("fit", "--series", "x.csv", "--alpha", -1) == 2
    assert run("nonsense") == 2


def test_fmt_and_table(tmp_path):
    assert fmt(0.1) == "0.1" and fmt(float("nan")) == "" and fmt(3) == "3"
    t = ResultTable(["a", "b"])
    t.add(1, 0.25)
    t.write(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_bytes() == b"a,b\n1,0.25\n"
    with pytest.raises(ValueError, match="unique"):
        ResultTable(["a", "a"])


# ---------------------------------------------------------------- bench

BENCH = ("bench", "--trials", 3, "--lengths", "1000,3000", "--systems", 12,
         "--eps", "1e-2,1e-3,1e-4", "--seed", 2)


def test_bench_outputs(tmp_path):
    assert run(*BENCH, "--out", tmp_path) == 0
    for name in ("convergence.csv", "perturbation.csv", "correlation.csv",
                 "bench_summary.json", "timings.csv"):
        assert (tmp_path / name).exists()
    summary = json.loads((tmp_path / "bench_summary.json").read_text())
    assert abs(summary["slope_perturbation_simple"] - 1.0) <= 0.1
    assert len(rows(tmp_path / "correlation.csv")) == 66


def test_bench_deterministic_across_threads(tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("LDS_SPECTRA_THREADS", threads)
        d = tmp_path / threads
        assert run(*BENCH, "--out", d) == 0
        outs.append(files_bytes(d))
    assert outs[0] == outs[1]


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lds_spectra", "simulate", "--systems", "1",
                          "--len", "50", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout) == {"series": 1}
