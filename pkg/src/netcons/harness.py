"""Batch experiments and the statistics extracted from them."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .detectors import resolve_detector
from .engine import RunResult, run
from .protocols import ProtocolSpec, builtin, parse_protocol_file
from .schedulers import SchedulerConfig

__all__ = [
    "COMPLEXITIES",
    "DEFAULT_COMPLEXITY",
    "ExperimentSpec",
    "CoefficientCell",
    "ExponentFit",
    "CoefficientReport",
    "SuccessRate",
    "CensusWindowReport",
    "derive_seed",
    "default_max_steps",
    "run_batch",
    "estimate_coefficient",
    "fit_exponent",
    "counting_success_rate",
    "wilson_interval",
    "census_window",
    "write_results",
    "read_results_csv",
    "load_experiment",
]

COMPLEXITIES = {
    "n^2": lambda n: float(n) ** 2,
    "n^2 log n": lambda n: float(n) ** 2 * math.log(n),
    "n^3": lambda n: float(n) ** 3,
}

DEFAULT_COMPLEXITY = {
    "fast-global-line": "n^3",
    "faster-global-line": "n^3",
    "global-star": "n^2 log n",
    "cycle-cover": "n^2",
    "counting-upper-bound": "n^2 log n",
}

MAX_STEPS_FACTOR = 50
MAX_STEPS_CAP = 5 * 10**9

CSV_COLUMNS = (
    "protocol", "scheduler", "n", "seed", "b", "converged", "total", "effective", "r0", "r1",
)


def default_max_steps(complexity: str, n: int, factor: float = MAX_STEPS_FACTOR) -> int:
    return int(min(factor * COMPLEXITIES[complexity](n), MAX_STEPS_CAP))


def derive_seed(base_seed: int, n: int, rep: int) -> int:
    """Per-run seed; a pure function of (base seed, size, repetition)."""
    state = np.random.SeedSequence([base_seed, n, rep]).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


@dataclass
class ExperimentSpec:
    protocol: str = "faster-global-line"
    protocol_file: str | None = None
    schedulers: tuple[str, ...] = ("random",)
    detector: str | None = None
    sizes: tuple[int, ...] = (100,)
    reps: int = 1
    seed: int = 0
    b: int = 2
    max_steps: int | None = None
    max_steps_factor: float = MAX_STEPS_FACTOR
    complexity: str | None = None
    history_capacity: int | None = None
    bias: float | None = None

    def __post_init__(self):
        if isinstance(self.schedulers, str):
            self.schedulers = (self.schedulers,)
        self.schedulers = tuple(self.schedulers)
        self.sizes = tuple(int(n) for n in self.sizes)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.sizes or min(self.sizes) < 2:
            raise ValueError("sizes must be non-empty and >= 2")
        if self.max_steps is not None and self.max_steps <= 0:
            raise ValueError("max_steps must be > 0")
        if self.complexity is not None and self.complexity not in COMPLEXITIES:
            raise ValueError(f"complexity must be one of {sorted(COMPLEXITIES)}")

    def load_protocol(self) -> ProtocolSpec:
        if self.protocol_file:
            return parse_protocol_file(Path(self.protocol_file).read_text())
        return builtin(self.protocol, b=self.b)

    def complexity_for(self, protocol: ProtocolSpec) -> str:
        return self.complexity or DEFAULT_COMPLEXITY.get(protocol.name, "n^3")

    def scheduler_configs(self) -> list[SchedulerConfig]:
        return [
            SchedulerConfig(kind=k).with_overrides(
                history_capacity=self.history_capacity, bias=self.bias
            )
            for k in self.schedulers
        ]


def _run_task(task) -> RunResult:
    protocol, n, sched, detector, max_steps, seed = task
    return run(protocol, n, sched, detector, max_steps=max_steps, seed=seed)


def run_batch(spec: ExperimentSpec, workers: int = 1) -> list[RunResult]:
    """Run every (scheduler, size, repetition) cell of ``spec``.

    Results come back ordered by scheduler, size and repetition whatever the
    number of workers. Runs that exhaust ``max_steps`` are kept with
    ``converged=False``.
    """
    protocol = spec.load_protocol()
    resolve_detector(protocol, spec.detector)
    complexity = spec.complexity_for(protocol)
    tasks = []
    for sched in spec.scheduler_configs():
        for n in spec.sizes:
            budget = spec.max_steps or default_max_steps(complexity, n, spec.max_steps_factor)
            for rep in range(spec.reps):
                tasks.append((protocol, n, sched, spec.detector, budget, derive_seed(spec.seed, n, rep)))
    if workers <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# ---------------------------------------------------------------------------
# coefficients and exponent fits


@dataclass
class CoefficientCell:
    scheduler: str
    n: int
    runs: int
    excluded: int
    mean: float | None
    std: float | None
    coefficient: float | None


@dataclass
class ExponentFit:
    alpha: float
    intercept: float
    r2: float


@dataclass
class CoefficientReport:
    complexity: str
    log_base: str = "e"
    convergence: str = "structural"
    cells: list[CoefficientCell] = field(default_factory=list)
    fits: dict[str, ExponentFit] = field(default_factory=dict)

    def cell(self, scheduler: str, n: int) -> CoefficientCell | None:
        for c in self.cells:
            if c.scheduler == scheduler and c.n == n:
                return c
        return None

    def to_dict(self) -> dict:
        return {
            "complexity": self.complexity,
            "log_base": self.log_base,
            "convergence": self.convergence,
            "cells": [asdict(c) for c in self.cells],
            "fits": {k: asdict(v) for k, v in sorted(self.fits.items())},
        }


def _group(results):
    cells = defaultdict(list)
    for r in results:
        cells[(r.scheduler, r.n)].append(r)
    return cells


def fit_exponent(results, min_reps: int = 5) -> ExponentFit:
    """Least squares of ln(mean T) against ln n over the converged runs."""
    by_n = defaultdict(list)
    for r in results:
        if r.converged:
            by_n[r.n].append(r.total_interactions)
    sizes = sorted(n for n, ts in by_n.items() if len(ts) >= min_reps)
    if len(sizes) < 3:
        raise ValueError(
            f"exponent fit needs >= 3 distinct sizes with >= {min_reps} converged runs, got {sizes}"
        )
    x = np.log(sizes)
    y = np.log([np.mean(by_n[n]) for n in sizes])
    fit = stats.linregress(x, y)
    return ExponentFit(alpha=float(fit.slope), intercept=float(fit.intercept), r2=float(fit.rvalue**2))


def estimate_coefficient(results, complexity: str = "n^3", min_reps: int = 5) -> CoefficientReport:
    """Mean interaction count over ``complexity(n)`` per (scheduler, n).

    Non-converged runs are left out of the mean and counted in ``excluded``.
    A cell with no converged run has ``None`` statistics.
    """
    f = COMPLEXITIES[complexity]
    report = CoefficientReport(complexity=complexity)
    grouped = _group(results)
    for (sched, n) in sorted(grouped, key=lambda k: (k[0], k[1])):
        rs = grouped[(sched, n)]
        ts = np.array([r.total_interactions for r in rs if r.converged], dtype=float)
        excluded = len(rs) - len(ts)
        if len(ts):
            mean = float(ts.mean())
            std = float(ts.std(ddof=1)) if len(ts) > 1 else 0.0
            report.cells.append(CoefficientCell(sched, n, len(ts), excluded, mean, std, mean / f(n)))
        else:
            report.cells.append(CoefficientCell(sched, n, 0, excluded, None, None, None))
    by_sched = defaultdict(list)
    for r in results:
        by_sched[r.scheduler].append(r)
    for sched, rs in by_sched.items():
        try:
            report.fits[sched] = fit_exponent(rs, min_reps)
        except ValueError:
            pass
    return report


# ---------------------------------------------------------------------------
# counting


@dataclass
class SuccessRate:
    threshold: float
    runs: int
    successes: int
    rate: float
    low: float
    high: float


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return low, high


def counting_success_rate(results, threshold: float) -> SuccessRate:
    """Fraction of counting runs whose first counter reached ``threshold * n``."""
    results = list(results)
    if any(r.leader_counters is None for r in results):
        raise TypeError("counting_success_rate needs results of the counting protocol")
    hits = sum(r.leader_counters[0] >= threshold * r.n for r in results)
    low, high = wilson_interval(hits, len(results))
    rate = hits / len(results) if results else float("nan")
    return SuccessRate(threshold, len(results), hits, rate, low, high)


# ---------------------------------------------------------------------------
# census windows


@dataclass
class CensusWindowReport:
    alpha: float
    window: int
    normalized: float
    total_interactions: int


def census_window(trace, alpha: float, n: int | None = None) -> CensusWindowReport:
    """Longest run of consecutive steps where every state count is >= alpha * n.

    ``trace`` holds one census row per step (the state counts after that step).
    """
    trace = np.asarray(trace)
    if trace.ndim != 2:
        raise ValueError("census trace must be a steps x states array")
    steps, nq = trace.shape
    if n is None:
        n = int(trace[0].sum()) if steps else 0
    if alpha <= 0 or alpha >= 1 / nq:
        warnings.warn(
            f"alpha={alpha} outside (0, 1/|Q|) = (0, {1 / nq:.4g}); the window is degenerate",
            stacklevel=2,
        )
    ok = (trace >= alpha * n).all(axis=1) if steps else np.zeros(0, bool)
    best = 0
    if ok.any():
        # lengths of the True runs from the boundaries of padded differences
        edges = np.flatnonzero(np.diff(np.concatenate(([0], ok.astype(np.int8), [0]))))
        best = int((edges[1::2] - edges[::2]).max())
    return CensusWindowReport(alpha, best, best / n if n else 0.0, steps)


# ---------------------------------------------------------------------------
# files


def _csv_row(r: RunResult) -> list:
    r0, r1 = r.leader_counters if r.leader_counters is not None else ("", "")
    b = "" if r.head_start is None else r.head_start
    return [
        r.protocol, r.scheduler, r.n, r.seed, b, int(r.converged),
        r.total_interactions, r.effective_interactions, r0, r1,
    ]


def results_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(_csv_row(r))
    return buf.getvalue()


def write_results(results, report: dict | CoefficientReport | None, path) -> tuple[Path, Path]:
    """Write ``results.csv`` and ``report.json`` into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(report, CoefficientReport):
        report = report.to_dict()
    csv_path, json_path = path / "results.csv", path / "report.json"
    csv_path.write_text(results_csv(results))
    json_path.write_text(json.dumps(report or {}, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_results_csv(path) -> list[RunResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            counters = (int(row["r0"]), int(row["r1"])) if row["r0"] else None
            out.append(
                RunResult(
                    protocol=row["protocol"],
                    scheduler=row["scheduler"],
                    detector="",
                    n=int(row["n"]),
                    seed=int(row["seed"]),
                    converged=row["converged"] == "1",
                    total_interactions=int(row["total"]),
                    effective_interactions=int(row["effective"]),
                    leader_counters=counters,
                    head_start=int(row["b"]) if row["b"] else None,
                )
            )
    return out


def build_report(spec: ExperimentSpec, results, threshold: float | None = None) -> dict:
    protocol = spec.load_protocol()
    complexity = spec.complexity_for(protocol)
    report = estimate_coefficient(results, complexity).to_dict()
    report["protocol"] = protocol.name
    report["detector"] = resolve_detector(protocol, spec.detector).value
    report["seed"] = spec.seed
    if protocol.is_counting:
        report["head_start"] = protocol.head_start
        report["counting"] = {
            str(t): asdict(counting_success_rate(results, t))
            for t in sorted({0.5, 0.9} | ({threshold} if threshold else set()))
        }
    return report


def load_experiment(path) -> ExperimentSpec:
    """Read an experiment description from a JSON file.

    Keys mirror :class:`ExperimentSpec`; ``scheduler`` is accepted for a
    single scheduler.
    """
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("experiment file must hold a JSON object")
    if "scheduler" in data:
        data["schedulers"] = [data.pop("scheduler")]
    if data.get("protocol_file"):
        base = Path(path).parent
        data["protocol_file"] = os.fspath(base / data["protocol_file"])
    allowed = set(ExperimentSpec.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
    return ExperimentSpec(**data)

