"""Method comparison, timing and export of evaluation artifacts.

A *method* is any object with a ``name`` and an ``allocate(dataset)`` method
returning an (N, K) array of power coefficients. Rows that contain NaN mark
samples on which the method failed. Solver-backed methods, a trained model
and the equal-power baseline are provided.

CSV schemas::

    cdf.csv      method,x_se,F
    summary.csv  method,median_min_se,median_sum_se,median_geomean_se,p5_se,mean_se
    timing.csv   method,sec_per_sample,samples
    curve.csv    epoch,mean_loss,lr
"""

from __future__ import annotations

import csv
import io
import json
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pipeline import Dataset, LearningCurve, infer
from .solvers import solve_maxmin, solve_weighted

REPORT_FORMAT_VERSION = 1
SUMMARY_FIELDS = ("median_min_se", "median_sum_se", "median_geomean_se", "p5_se", "mean_se")


def version_string() -> str:
    from . import __version__
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def empirical_cdf(values):
    """Step-function points (x, F) with F(x) the fraction of values <= x."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empirical CDF of an empty sample")
    if not np.all(np.isfinite(v)):
        raise ValueError("empirical CDF needs finite values")
    x, counts = np.unique(v, return_counts=True)
    return x, np.cumsum(counts) / v.size


def percentile(values, q: float) -> float:
    """Order-statistic percentile (inverse of the empirical CDF)."""
    return float(np.percentile(np.asarray(values, dtype=float), q, method="inverted_cdf"))


def stochastically_dominates(a, b) -> bool:
    """First-order dominance of sample ``a`` over ``b``: F_a(x) <= F_b(x) for every x."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    grid = np.union1d(a, b)
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    return bool(np.all(Fa <= Fb))


def summarize(se_matrix: np.ndarray) -> dict:
    se_matrix = np.asarray(se_matrix, dtype=float)
    with np.errstate(divide="ignore"):
        geo = np.exp(np.log(se_matrix).mean(axis=1))
    return {
        "median_min_se": float(np.median(se_matrix.min(axis=1))),
        "median_sum_se": float(np.median(se_matrix.sum(axis=1))),
        "median_geomean_se": float(np.median(geo)),
        "p5_se": percentile(se_matrix, 5),
        "mean_se": float(se_matrix.mean()),
    }


# --------------------------------------------------------------------------
# methods
# --------------------------------------------------------------------------

class EqualPower:
    name = "equal"

    def allocate(self, ds: Dataset) -> np.ndarray:
        return np.ones((len(ds), ds.K))


class SolverMethod:
    """Per-sample classical solver; ``objective`` is maxmin, sum_rate or product."""

    def __init__(self, objective: str, name: str | None = None, **options):
        if objective not in ("maxmin", "sum_rate", "product"):
            raise ValueError(f"unknown objective {objective!r}")
        self.objective = objective
        self.name = name or f"opt-{objective}"
        self.options = options

    def solve_one(self, coeffs):
        if self.objective == "maxmin":
            return solve_maxmin(coeffs, **self.options)
        return solve_weighted(coeffs, self.objective, **self.options)

    def allocate(self, ds: Dataset) -> np.ndarray:
        out = np.full((len(ds), ds.K), np.nan)
        for i in range(len(ds)):
            try:
                out[i] = self.solve_one(ds.coeffs[i]).eta
            except (ValueError, FloatingPointError, np.linalg.LinAlgError):
                pass  # left as NaN: recorded as a per-sample failure
        return out


class ModelMethod:
    def __init__(self, model, name: str = "dl"):
        self.model = model
        self.name = name

    def allocate(self, ds: Dataset) -> np.ndarray:
        return infer(self.model, ds.B)


class FunctionMethod:
    def __init__(self, name: str, fn):
        self.name = name
        self.fn = fn

    def allocate(self, ds: Dataset) -> np.ndarray:
        return np.asarray(self.fn(ds), dtype=float)


# --------------------------------------------------------------------------
# comparison
# --------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    se: dict                      # method -> (N, K) SE matrix over kept samples
    summary: dict                 # method -> summary dict
    failures: dict                # method -> list of failed sample indices
    kept: list                    # indices of samples kept for the paired comparison
    metadata: dict = field(default_factory=dict)

    @property
    def methods(self) -> list:
        return list(self.se)

    def cdf(self, method: str):
        return empirical_cdf(self.se[method])

    def to_dict(self) -> dict:
        return {
            "format": "cfpower.comparison",
            "version": REPORT_FORMAT_VERSION,
            "metadata": self.metadata,
            "kept": [int(i) for i in self.kept],
            "failures": {m: [int(i) for i in f] for m, f in self.failures.items()},
            "summary": self.summary,
            "se": {m: v.tolist() for m, v in self.se.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ComparisonReport":
        if doc.get("format") != "cfpower.comparison":
            raise ValueError("not a cfpower comparison report")
        return cls(
            se={m: np.asarray(v, dtype=float) for m, v in doc["se"].items()},
            summary=doc["summary"], failures=doc["failures"], kept=doc["kept"],
            metadata=doc.get("metadata", {}),
        )


def _valid_rows(eta: np.ndarray, K: int) -> np.ndarray:
    return np.all(np.isfinite(eta) & (eta >= 0) & (eta <= 1), axis=1)


def compare_methods(test: Dataset, methods, tau_p=None, tau_c=None, metadata=None) -> ComparisonReport:
    """Per-sample SE of every method on the same test realizations.

    A sample on which any method fails is dropped for all methods, so the
    summaries stay paired.
    """
    from .metrics import se, sinr

    methods = list(methods)
    if not methods:
        raise ValueError("no methods to compare")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate method names in {names}")
    tau_p = test.params.tau_p if tau_p is None else tau_p
    tau_c = test.params.tau_c if tau_c is None else tau_c
    etas, failures = {}, {}
    ok = np.ones(len(test), dtype=bool)
    for m in methods:
        eta = np.asarray(m.allocate(test), dtype=float)
        if eta.shape != (len(test), test.K):
            raise ValueError(f"method {m.name!r} returned shape {eta.shape}, expected {(len(test), test.K)}")
        valid = _valid_rows(eta, test.K)
        failures[m.name] = np.nonzero(~valid)[0].tolist()
        ok &= valid
        etas[m.name] = eta
    kept = np.nonzero(ok)[0]
    if kept.size == 0:
        raise ValueError("every sample failed for at least one method")
    coeffs = test.coeffs[kept]
    se_by_method = {name: se(sinr(coeffs, eta[kept]), tau_p, tau_c) for name, eta in etas.items()}
    meta = {"K": test.K, "L": test.L, "test_seed": test.seed, "samples": len(test),
            "tau_p": tau_p, "tau_c": tau_c, "version": version_string()}
    meta.update(metadata or {})
    return ComparisonReport(
        se=se_by_method,
        summary={name: summarize(v) for name, v in se_by_method.items()},
        failures=failures, kept=kept.tolist(), metadata=meta,
    )


# --------------------------------------------------------------------------
# timing
# --------------------------------------------------------------------------

@dataclass
class TimingReport:
    sec_per_sample: dict
    samples: dict
    hardware: str = ""
    metadata: dict = field(default_factory=dict)

    def ratio(self, slow: str, fast: str) -> float:
        return self.sec_per_sample[slow] / self.sec_per_sample[fast]

    def to_dict(self) -> dict:
        return {"format": "cfpower.timing", "version": REPORT_FORMAT_VERSION,
                "sec_per_sample": self.sec_per_sample, "samples": self.samples,
                "hardware": self.hardware, "metadata": self.metadata}

    @classmethod
    def from_dict(cls, doc: dict) -> "TimingReport":
        if doc.get("format") != "cfpower.timing":
            raise ValueError("not a cfpower timing report")
        return cls(doc["sec_per_sample"], doc["samples"], doc.get("hardware", ""), doc.get("metadata", {}))


def _hardware_note() -> str:
    import os
    import platform
    return f"{platform.processor() or platform.machine()}, {os.cpu_count()} cpu, numpy {np.__version__}"


def bench_timing(test: Dataset, methods, solver_samples: int = 20, batch: int = 200, repeats: int = 5) -> TimingReport:
    """Mean wall time per sample.

    Solver methods are timed over single-sample calls on the first
    ``solver_samples`` realizations; batch methods (trained model, equal
    power) over one ``batch``-sample call divided by ``batch``, averaged over
    ``repeats`` calls. One untimed warm-up call precedes every measurement.
    """
    per, counts = {}, {}
    for m in methods:
        if isinstance(m, SolverMethod):
            n = min(solver_samples, len(test))
            m.solve_one(test.coeffs[0])
            t0 = time.perf_counter()
            for i in range(n):
                m.solve_one(test.coeffs[i])
            per[m.name] = (time.perf_counter() - t0) / n
            counts[m.name] = n
        else:
            n = min(batch, len(test))
            sub = test.subset(np.arange(n))
            m.allocate(sub)
            t0 = time.perf_counter()
            for _ in range(repeats):
                m.allocate(sub)
            per[m.name] = (time.perf_counter() - t0) / (repeats * n)
            counts[m.name] = n
    return TimingReport(per, counts, _hardware_note(),
                        {"K": test.K, "L": test.L, "version": version_string()})


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cdf_csv(report: ComparisonReport) -> str:
    rows = []
    for name in report.methods:
        x, F = report.cdf(name)
        rows += [[name, repr(float(a)), repr(float(b))] for a, b in zip(x, F)]
    return _csv_text(["method", "x_se", "F"], rows)


def summary_csv(report: ComparisonReport) -> str:
    rows = [[name, *(repr(report.summary[name][f]) for f in SUMMARY_FIELDS)] for name in report.methods]
    return _csv_text(["method", *SUMMARY_FIELDS], rows)


def timing_csv(report: TimingReport) -> str:
    rows = [[name, repr(v), report.samples[name]] for name, v in report.sec_per_sample.items()]
    return _csv_text(["method", "sec_per_sample", "samples"], rows)


def export(report, fmt: str, path) -> Path:
    """Write ``report`` as CSV or JSON at ``path``.

    CSV of a comparison report writes the CDF points; the summary table goes
    next to it as ``<stem>_summary.csv``.
    """
    path = Path(path)
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    if isinstance(report, ComparisonReport):
        if not report.se:
            raise ValueError("refusing to export an empty comparison report")
        text = cdf_csv(report) if fmt == "csv" else json.dumps(report.to_dict())
    elif isinstance(report, TimingReport):
        if not report.sec_per_sample:
            raise ValueError("refusing to export an empty timing report")
        text = timing_csv(report) if fmt == "csv" else json.dumps(report.to_dict())
    elif isinstance(report, LearningCurve):
        if len(report) == 0:
            raise ValueError("refusing to export an empty learning curve")
        text = report.to_csv() if fmt == "csv" else json.dumps({"loss": report.loss, "lr": report.lr})
    else:
        raise TypeError(f"cannot export {type(report).__name__}")
    try:
        path.write_text(text)
        if fmt == "csv" and isinstance(report, ComparisonReport):
            path.with_name(f"{path.stem}_summary.csv").write_text(summary_csv(report))
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def load_report(path):
    doc = json.loads(Path(path).read_text())
    kind = doc.get("format")
    if kind == "cfpower.comparison":
        return ComparisonReport.from_dict(doc)
    if kind == "cfpower.timing":
        return TimingReport.from_dict(doc)
    raise ValueError(f"{path}: unrecognised report format {kind!r}")
