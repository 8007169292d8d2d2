"""Command-line front end.

Subcommands: ``simulate``, ``fit``, ``eigs``, ``cluster``, ``bench``. Every
option can also come from a flat JSON document passed with ``--config``;
flags override config keys, which override defaults. Unknown config keys are
a usage error.

File formats (UTF-8, LF line endings, ``.`` decimal separator):

* series: ``series_id,t,channel,value``; an empty value is a missing cell.
  Observed inputs sit in a companion ``<stem>_inputs.csv`` with the same
  columns.
* labels: ``series_id,label``
* spectra: ``series_id,re,im``, one row per eigenvalue; the ``eigs`` output
  appends ``cond_lower,cond_upper`` (empty for a degenerate estimate).
* fits: ``series_id,method,order,rows_used,iterations,intercept,phi_1..,theta_1..``
* metrics: flat JSON.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from ._parallel import ordered_map
from .arma_fit import FitConfig, ar_baseline_fit, fit_series
from .cluster_eval import adjusted_mutual_info, adjusted_rand, cluster_series, v_measure
from .eig_recovery import (
    convergence_study,
    correlation_study,
    estimate_from_phi,
    loglog_slope,
    median_errors,
    perturbation_study,
)
from .errors import DataError, LdsSpectraError, NumericalError
from .lds_core import TimeSeries, derived_seed, make_benchmark, random_stable_lds, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_FIT_DEFAULTS = {
    "n": 2, "alpha": 0.01, "intercept": True, "exog_lag_start": 0,
    "residual_scheme": "staggered", "method": "arma",
}

DEFAULTS = {
    "simulate": {
        "seed": 0, "clusters": None, "systems": 1, "n": 2, "m": 1, "k": 1, "len": 1000,
        "output_noise": 0.01, "observe_inputs": False, "out": ".",
    },
    "fit": {"series": None, "inputs": None, "out": "fits.csv", **_FIT_DEFAULTS},
    "eigs": {"series": None, "inputs": None, "fits": None, "out": "eigs.csv",
             **_FIT_DEFAULTS},
    "cluster": {
        "series": None, "inputs": None, "fits": None, "clusters": 2, "seed": 0,
        "restarts": 10, "labels": None, "out": "assignments.csv",
        "metrics": "metrics.json", **_FIT_DEFAULTS,
    },
    "bench": {
        "study": "all", "seed": 0, "n": 2, "trials": 50,
        "lengths": [1000, 3000, 10000, 30000, 100000], "alpha": 0.01,
        "systems": 100, "eps": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6], "out": ".",
    },
}

# (low, high) inclusive bounds on numeric options
_RANGES = {
    "n": (1, 64), "m": (1, 1024), "k": (1, 1024), "len": (1, 10**8), "systems": (1, 10**6),
    "clusters": (1, 10**6), "trials": (1, 10**6), "restarts": (1, 10**4),
    "alpha": (0.0, math.inf), "output_noise": (0.0, math.inf), "seed": (0, 2**63 - 1),
}
_CHOICES = {
    "method": ("arma", "ar"), "residual_scheme": ("staggered", "latest"),
    "exog_lag_start": (0, 1),
    "study": ("all", "convergence", "perturbation", "correlation"),
}


@dataclass
class ExperimentConfig:
    """Resolved options of one command as a flat key-value document."""

    command: str
    values: dict = field(default_factory=dict)

    @classmethod
    def resolve(cls, command: str, flags: dict, config_path: str | None) -> "ExperimentConfig":
        defaults = DEFAULTS[command]
        from_file = {}
        if config_path:
            try:
                with open(config_path, encoding="utf-8") as fh:
                    from_file = json.load(fh)
            except OSError as exc:
                raise UsageError(f"cannot read config {config_path}: {exc.strerror}") from exc
            except json.JSONDecodeError as exc:
                raise UsageError(f"config {config_path} is not valid JSON: {exc}") from exc
            if not isinstance(from_file, dict):
                raise UsageError(f"config {config_path} must be a JSON object")
            unknown = sorted(set(from_file) - set(defaults))
            if unknown:
                raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        values = {**defaults, **from_file, **flags}
        cfg = cls(command, values)
        cfg.validate()
        return cfg

    def validate(self):
        for key, value in self.values.items():
            if value is None:
                continue
            if key in _RANGES:
                lo, hi = _RANGES[key]
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise UsageError(f"{key} must be a number, got {value!r}")
                if not lo <= value <= hi:
                    raise UsageError(f"{key}={value} outside [{lo}, {hi}]")
            if key in _CHOICES and value not in _CHOICES[key]:
                raise UsageError(f"{key} must be one of {_CHOICES[key]}, got {value!r}")
        for key in ("lengths", "eps"):
            if key in self.values:
                seq = self.values[key]
                if not isinstance(seq, list) or not seq or any(
                        isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0
                        for v in seq):
                    raise UsageError(f"{key} must be a non-empty list of positive numbers")

    def __getitem__(self, key):
        return self.values[key]

    def to_json(self) -> str:
        return json.dumps({"command": self.command, **self.values}, sort_keys=True, indent=2)


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------

def fmt(x) -> str:
    """Shortest round-tripping decimal; empty for NaN."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    return "" if math.isnan(x) else repr(x)


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")

    def add(self, *cells):
        if len(cells) != len(self.columns):
            raise ValueError(f"row has {len(cells)} cells, table has {len(self.columns)}")
        self.rows.append(cells)

    def write(self, path):
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([fmt(c) for c in row])


def _ensure_parent(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)


def _read_csv(path, required: list) -> list:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
                raise DataError(f"{path}: header must contain {','.join(required)}")
            return list(reader)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc


def _parse_long(path) -> dict:
    """series_id -> (T, channels) array from a long-format CSV, ids in order
    of first appearance."""
    cells: dict = {}
    for lineno, row in enumerate(_read_csv(path, ["series_id", "t", "channel", "value"]), 2):
        try:
            t, ch = int(row["t"]), int(row["channel"])
            v = float(row["value"]) if row["value"].strip() else math.nan
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        if t < 0 or ch < 0:
            raise DataError(f"{path}:{lineno}: negative t or channel")
        cells.setdefault(row["series_id"], []).append((t, ch, v))
    out = {}
    for sid, entries in cells.items():
        arr = np.array(entries, dtype=float)
        T, C = int(arr[:, 0].max()) + 1, int(arr[:, 1].max()) + 1
        # cells absent from the file are missing as well
        data = np.full((T, C), np.nan)
        data[arr[:, 0].astype(int), arr[:, 1].astype(int)] = arr[:, 2]
        out[sid] = data
    return out


def _default_inputs_path(series_path) -> Path:
    p = Path(series_path)
    return p.with_name(p.stem + "_inputs" + p.suffix)


def read_series(path, inputs_path=None) -> list:
    outputs = _parse_long(path)
    if inputs_path is None and _default_inputs_path(path).exists():
        inputs_path = _default_inputs_path(path)
    inputs = _parse_long(inputs_path) if inputs_path else {}
    series = []
    for sid, y in outputs.items():
        x = inputs.get(sid)
        if inputs and x is None:
            raise DataError(f"{inputs_path}: no inputs for series {sid}")
        if x is not None:
            if x.shape[0] != y.shape[0]:
                raise DataError(f"series {sid}: {x.shape[0]} input steps, {y.shape[0]} outputs")
            if not np.all(np.isfinite(x)):
                raise DataError(f"series {sid}: inputs have missing cells")
        series.append(TimeSeries(y, x, series_id=sid, source=str(path)))
    if not series:
        raise DataError(f"{path}: no series")
    return series


def write_series(path, series: list, inputs: bool = False):
    table = ResultTable(["series_id", "t", "channel", "value"])
    for s in series:
        arr = s.inputs if inputs else s.outputs
        for t in range(arr.shape[0]):
            for c in range(arr.shape[1]):
                table.add(s.series_id, t, c, arr[t, c])
    table.write(path)


def read_labels(path) -> dict:
    out = {}
    for lineno, row in enumerate(_read_csv(path, ["series_id", "label"]), 2):
        try:
            out[row["series_id"]] = int(row["label"])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_fits(path) -> list:
    """(series_id, phi) pairs from a fits table."""
    rows = _read_csv(path, ["series_id", "order"])
    out = []
    for lineno, row in enumerate(rows, 2):
        try:
            n = int(row["order"])
            phi = np.array([float(row[f"phi_{i}"]) for i in range(1, n + 1)])
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: bad fit row ({exc})") from exc
        out.append((row["series_id"], phi))
    if not out:
        raise DataError(f"{path}: no fits")
    return out


def _write_json(path, doc: dict):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig) -> dict:
    out = Path(cfg["out"])
    seed = int(cfg["seed"])
    if cfg["clusters"] is not None:
        bench = make_benchmark(cfg["clusters"], cfg["systems"], cfg["n"], cfg["m"], cfg["k"],
                               cfg["len"], seed, output_noise_std=cfg["output_noise"])
        systems, labels, series = bench.systems, list(bench.labels), bench.series
        if cfg["observe_inputs"]:
            # the benchmark's inputs are hidden; regenerate with observed ones
            series = [simulate(s, cfg["len"], np.random.default_rng(derived_seed(seed, i)),
                               observe_inputs=True, series_id=str(i))
                      for i, s in enumerate(systems)]
    else:
        systems, series = [], []
        for i in range(cfg["systems"]):
            rng = np.random.default_rng(derived_seed(seed, i))
            p = random_stable_lds(cfg["n"], cfg["m"], cfg["k"], rng,
                                  output_noise_std=cfg["output_noise"])
            systems.append(p)
            series.append(simulate(p, cfg["len"], rng, observe_inputs=cfg["observe_inputs"],
                                   series_id=str(i)))
        labels = list(range(len(systems)))
    write_series(out / "series.csv", series)
    if cfg["observe_inputs"]:
        write_series(out / "series_inputs.csv", series, inputs=True)
    lab = ResultTable(["series_id", "label"])
    spec = ResultTable(["series_id", "re", "im"])
    for s, label, p in zip(series, labels, systems):
        lab.add(s.series_id, int(label))
        for v in p.spectrum().values:
            spec.add(s.series_id, v.real, v.imag)
    lab.write(out / "labels.csv")
    spec.write(out / "spectra.csv")
    return {"series": len(series)}


def _fit_config(cfg: ExperimentConfig) -> FitConfig:
    return FitConfig(order=cfg["n"], ridge_alpha=cfg["alpha"],
                     include_intercept=bool(cfg["intercept"]),
                     exog_lag_start=cfg["exog_lag_start"],
                     residual_scheme=cfg["residual_scheme"])


def _fit_all(cfg: ExperimentConfig) -> list:
    if not cfg["series"]:
        raise UsageError("--series is required")
    series = read_series(cfg["series"], cfg["inputs"])
    fcfg = _fit_config(cfg)

    def one(s):
        try:
            if cfg["method"] == "ar":
                return ar_baseline_fit(s, fcfg.order)
            return fit_series(s, fcfg)
        except LdsSpectraError as exc:
            raise type(exc)(f"series {s.series_id}: {exc}") from exc

    return list(zip([s.series_id for s in series], ordered_map(one, series)))


def _phis(cfg: ExperimentConfig) -> list:
    if cfg["fits"]:
        return read_fits(cfg["fits"])
    return [(sid, f.phi) for sid, f in _fit_all(cfg)]


def cmd_fit(cfg: ExperimentConfig) -> dict:
    fits = _fit_all(cfg)
    n = cfg["n"]
    table = ResultTable(["series_id", "method", "order", "rows_used", "iterations", "intercept"]
                        + [f"phi_{i}" for i in range(1, n + 1)]
                        + [f"theta_{i}" for i in range(1, n + 1)])
    for sid, f in fits:
        table.add(sid, cfg["method"], f.order, f.rows_used, f.iterations_run, f.intercept,
                  *f.phi, *f.theta)
    table.write(cfg["out"])
    return {"fits": len(fits)}


def cmd_eigs(cfg: ExperimentConfig) -> dict:
    table = ResultTable(["series_id", "re", "im", "cond_lower", "cond_upper"])
    estimates = ordered_map(lambda item: (item[0], estimate_from_phi(item[1])), _phis(cfg))
    degenerate = 0
    for sid, est in estimates:
        degenerate += est.degenerate
        for j, v in enumerate(est.spectrum.values):
            lo = est.cond.lower[j] if est.cond is not None else math.nan
            hi = est.cond.upper[j] if est.cond is not None else math.nan
            table.add(sid, v.real, v.imag, lo, hi)
    table.write(cfg["out"])
    return {"series": len(estimates), "degenerate": degenerate}


def cmd_cluster(cfg: ExperimentConfig) -> dict:
    phis = _phis(cfg)
    ids = [sid for sid, _ in phis]
    result = cluster_series([p for _, p in phis], cfg["clusters"],
                            np.random.default_rng(int(cfg["seed"])), restarts=cfg["restarts"])
    table = ResultTable(["series_id", "label"])
    for sid, label in zip(ids, result.assignment.labels):
        table.add(sid, int(label))
    table.write(cfg["out"])
    metrics = {"clusters": cfg["clusters"], "series": len(ids), "inertia": result.inertia,
               "method": cfg["method"] if not cfg["fits"] else "fits"}
    if cfg["labels"]:
        truth_map = read_labels(cfg["labels"])
        missing = [sid for sid in ids if sid not in truth_map]
        if missing:
            raise DataError(f"{cfg['labels']}: no label for series {missing[0]}")
        truth = np.array([truth_map[sid] for sid in ids])
        pred = result.assignment.labels
        metrics.update(ami=adjusted_mutual_info(truth, pred), ari=adjusted_rand(truth, pred),
                       v_measure=v_measure(truth, pred))
    _write_json(cfg["metrics"], metrics)
    return metrics


def cmd_bench(cfg: ExperimentConfig) -> dict:
    out = Path(cfg["out"])
    study = cfg["study"]
    seed = int(cfg["seed"])
    summary, timing = {"backend": kernels.BACKEND}, ResultTable(["study", "seconds", "backend"])

    if study in ("all", "convergence"):
        t0 = time.perf_counter()
        rows = convergence_study(cfg["n"], [int(T) for T in cfg["lengths"]], cfg["trials"], seed,
                                 alpha=cfg["alpha"])
        timing.add("convergence", time.perf_counter() - t0, kernels.BACKEND)
        table = ResultTable(["method", "T", "trial", "phi_error", "eig_error"])
        for r in rows:
            table.add(r["method"], r["T"], r["trial"], r["phi_error"], r["eig_error"])
        table.write(out / "convergence.csv")
        for method in ("arma", "ar"):
            for key in ("phi_error", "eig_error"):
                T, med = median_errors(rows, method, key)
                if len(T) > 1:
                    summary[f"slope_{method}_{key}"] = loglog_slope(T, med)

    if study in ("all", "perturbation"):
        t0 = time.perf_counter()
        table = ResultTable(["case", "eps", "movement"])
        cases = {"simple": [0.9, 0.5], "double": [0.5, 0.5]}
        for i, (name, spec) in enumerate(cases.items()):
            res = perturbation_study(spec, cfg["eps"], np.random.default_rng(derived_seed(seed, i)))
            for eps, move in res:
                table.add(name, eps, move)
            if len(res) > 1:
                summary[f"slope_perturbation_{name}"] = loglog_slope(res[:, 0], res[:, 1])
        timing.add("perturbation", time.perf_counter() - t0, kernels.BACKEND)
        table.write(out / "perturbation.csv")

    if study in ("all", "correlation"):
        t0 = time.perf_counter()
        res = correlation_study(cfg["systems"], cfg["n"], np.random.default_rng(seed))
        timing.add("correlation", time.perf_counter() - t0, kernels.BACKEND)
        table = ResultTable(["i", "j", "eig_distance", "ar_distance"])
        for i, j, de, da in res["pairs"]:
            table.add(int(i), int(j), de, da)
        table.write(out / "correlation.csv")
        summary["pearson"] = res["pearson"]

    _write_json(out / "bench_summary.json", summary)
    # wall-clock numbers are the only non-deterministic output, kept apart
    timing.write(out / "timings.csv")
    return summary


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "eigs": cmd_eigs,
            "cluster": cmd_cluster, "bench": cmd_bench}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from exc


def _add_fit_flags(p):
    p.add_argument("--series", help="series CSV (long format)")
    p.add_argument("--inputs", help="inputs CSV; default <series>_inputs.csv when present")
    p.add_argument("--n", type=int, help="model order")
    p.add_argument("--alpha", type=float, help="ridge penalty on MA terms")
    p.add_argument("--no-intercept", dest="intercept", action="store_false")
    p.add_argument("--exog-lag-start", type=int, choices=(0, 1))
    p.add_argument("--residual-scheme", choices=_CHOICES["residual_scheme"])
    p.add_argument("--method", choices=_CHOICES["method"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lds-spectra", description=__doc__.split("\n")[0],
                     argument_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", default=None, help="flat JSON config file")
        return p

    p = add("simulate", "generate a synthetic benchmark or independent systems")
    p.add_argument("--seed", type=int)
    p.add_argument("--clusters", type=int, help="omit for independent systems")
    p.add_argument("--systems", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--len", type=int)
    p.add_argument("--output-noise", type=float)
    p.add_argument("--observe-inputs", action="store_true")
    p.add_argument("--out", help="output directory")

    p = add("fit", "estimate AR parameters per series")
    _add_fit_flags(p)
    p.add_argument("--out")

    p = add("eigs", "estimate spectra with condition bounds")
    _add_fit_flags(p)
    p.add_argument("--fits", help="fits CSV to use instead of fitting --series")
    p.add_argument("--out")

    p = add("cluster", "k-means on AR parameters, scored against optional labels")
    _add_fit_flags(p)
    p.add_argument("--fits")
    p.add_argument("--clusters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--labels", help="ground-truth labels CSV")
    p.add_argument("--out")
    p.add_argument("--metrics")

    p = add("bench", "convergence, perturbation and correlation studies")
    p.add_argument("--study", choices=_CHOICES["study"])
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--lengths", type=_floats)
    p.add_argument("--alpha", type=float)
    p.add_argument("--systems", type=int)
    p.add_argument("--eps", type=_floats)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        config_path = args.pop("config", None)
        cfg = ExperimentConfig.resolve(command, args, config_path)
        result = COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"lds-spectra: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"lds-spectra: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"lds-spectra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"lds-spectra: data error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
