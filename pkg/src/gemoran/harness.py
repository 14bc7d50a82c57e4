"""Replicate fan-out, raw CSV output and convergence reports.

Every replicate draws from its own streams keyed by
``(master_seed, replicate, roles)``, so results do not depend on how
replicates are spread over worker processes.  Workers only return
records; the caller writes every file.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .feller import feller_exact_sample
from .model_core import InitSpec, ModelParams, SeedSpec, init_population, parse_init_spec
from .simulation import CSV_COLUMNS, TimeSeriesRecord, simulate
from .statistics import QV_COEFFICIENT, QV_COEFFICIENT_PRINTED, distance_suite, mean_se, second_moment_ode_solution

WORKERS_ENV = "GEMORAN_WORKERS"
REPORT_COLUMNS = ("model", "N", "t", "stat", "value", "se")
SIDECAR_COLUMNS = ("replicate", "occ_one", "occ_rho1", "occ_rho2", "occ_rho3", "occ_gap2",
                   "qv_jump_sq", "qv_int_rho1", "qv_int_excess")


class ConfigError(ValueError):
    pass


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


# --------------------------------------------------------------------------
# config


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


@dataclass
class ExperimentConfig:
    model: str = "jump"
    N: tuple[int, ...] = (50,)
    init: InitSpec = field(default_factory=lambda: InitSpec.poisson_truncated(2.0, 30))
    t_grid: tuple[float, ...] = (0.0, 0.5)
    replicates: int = 100
    seed: int = 0
    mu: float = 0.0
    nu: float = 0.0
    beta: float = 0.0
    alpha: float = 0.0
    distinct_parents: bool = False
    feller_samples: int = 20000
    out_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.model not in ("jump", "graph", "graph_unit", "both"):
            raise ConfigError(f"model must be jump, graph, graph_unit or both, got {self.model!r}")
        self.N = tuple(int(n) for n in self.N)
        self.t_grid = tuple(float(t) for t in self.t_grid)
        if not self.N or any(n < 1 for n in self.N):
            raise ConfigError("N values must be >= 1")
        if not self.t_grid or any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ConfigError("t grid must be non-empty and strictly increasing")
        if self.t_grid[0] < 0:
            raise ConfigError("t grid must be non-negative")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def models(self) -> tuple[str, ...]:
        return ("jump", "graph") if self.model == "both" else (self.model,)

    @property
    def t_end(self) -> float:
        return self.t_grid[-1]

    def params(self, N: int) -> ModelParams:
        return ModelParams(N, self.mu, self.nu, self.beta, self.alpha, self.distinct_parents)


_SIMPLE_KEYS = {
    "model": str, "replicates": int, "seed": int, "mu": float, "nu": float, "beta": float,
    "alpha": float, "feller_samples": int, "out_dir": str, "workers": int,
}
_INIT_KEYS = ("init.kind", "init.value", "init.lambda", "init.truncation")


def parse_config_text(text: str, overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Errors name the
    offending line."""
    kwargs: dict[str, object] = {}
    init_keys: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _SIMPLE_KEYS:
                kwargs[key] = _SIMPLE_KEYS[key](value)
            elif key == "N":
                kwargs["N"] = tuple(_ints(value))
            elif key in ("t_grid", "t"):
                kwargs["t_grid"] = tuple(_floats(value))
            elif key == "distinct_parents":
                if value.lower() not in _BOOL:
                    raise ValueError(f"not a boolean: {value!r}")
                kwargs["distinct_parents"] = _BOOL[value.lower()]
            elif key in _INIT_KEYS:
                init_keys[key] = value
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    if init_keys:
        try:
            kwargs["init"] = parse_init_spec(init_keys)
        except ValueError as exc:
            raise ConfigError(f"init: {exc}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            kwargs[k] = v
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), overrides)


# --------------------------------------------------------------------------
# replicates


@dataclass(frozen=True)
class ReplicateTask:
    """Everything a worker needs to run one replicate."""

    model: str
    params: ModelParams
    init: InitSpec
    t_grid: tuple[float, ...]
    seed: int
    replicate: int
    tag: str = ""

    def streams(self):
        key = SeedSpec(self.seed, self.replicate)
        roles = (self.tag, self.model, self.params.N)
        return key.generator("init", *roles), key.generator("dynamics", *roles)


def run_replicate(task: ReplicateTask) -> TimeSeriesRecord:
    init_rng, dyn_rng = task.streams()
    pop0 = init_population(task.init, task.params.N, init_rng)
    return simulate(task.model, pop0, task.params, task.t_grid[-1], dyn_rng, record_times=task.t_grid)


def _run_chunk(tasks: Sequence[ReplicateTask]) -> list[TimeSeriesRecord]:
    return [run_replicate(t) for t in tasks]


def simulate_replicates(model: str, params: ModelParams, init: InitSpec, t_grid: Sequence[float],
                        replicates: int, seed: int, workers: int = 1, tag: str = "") -> list[TimeSeriesRecord]:
    """Run ``replicates`` independent replicates; output is in replicate order
    and identical for any ``workers``."""
    tasks = [ReplicateTask(model, params, init, tuple(float(t) for t in t_grid), int(seed), r, tag)
             for r in range(replicates)]
    if workers <= 1 or replicates < 2:
        return _run_chunk(tasks)
    size = math.ceil(len(tasks) / (4 * workers))
    chunks = [tasks[i:i + size] for i in range(0, len(tasks), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out: list[TimeSeriesRecord] = []
        for part in pool.map(_run_chunk, chunks):
            out.extend(part)
    return out


def stack(records: Sequence[TimeSeriesRecord], attr: str) -> np.ndarray:
    """(replicates, len(t_grid)) array of a recorded statistic."""
    return np.vstack([getattr(r, attr) for r in records])


# --------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def raw_csv(records: Sequence[TimeSeriesRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep, rec in enumerate(records):
        for row in rec.rows(rep):
            w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def sidecar_csv(records: Sequence[TimeSeriesRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIDECAR_COLUMNS)
    for rep, rec in enumerate(records):
        occ = rec.occupation.values
        w.writerow([str(rep)] + [_fmt(float(occ[n])) for n in ("one", "rho1", "rho2", "rho3", "gap2")]
                   + [_fmt(float(v)) for v in (rec.qv.jump_sq_sum, rec.qv.int_rho1, rec.qv.int_excess)])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


# --------------------------------------------------------------------------
# reports


@dataclass
class ConvergenceReport:
    """Long-format rows ``(model, N, t, stat, value, se)``; ``se`` is
    sd/sqrt(replicates) or NaN when not applicable."""

    rows: list[tuple] = field(default_factory=list)

    def add(self, model, N, t, stat, value, se=float("nan")):
        self.rows.append((model, int(N), float(t), stat, float(value), float(se)))

    def get(self, model, N, t, stat) -> tuple[float, float]:
        for m, n, tt, s, v, se in self.rows:
            if m == model and n == N and tt == t and s == stat:
                return v, se
        raise KeyError((model, N, t, stat))

    def stats(self) -> set[str]:
        return {r[3] for r in self.rows}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for m, n, t, s, v, se in self.rows:
            w.writerow([m, n, _fmt(t), s, _fmt(v), _fmt(se)])
        return buf.getvalue()


def summarize(report: ConvergenceReport, model: str, N: int, init: InitSpec,
              records: Sequence[TimeSeriesRecord], feller_samples: int, seed: int) -> None:
    times = records[0].times
    Z = stack(records, "Z")
    rho2 = stack(records, "rho2")
    gap2 = stack(records, "gap2")
    deficit = Z**2 - rho2
    z_ref = init.mean
    e0 = float(deficit[:, 0].mean()) if times[0] == 0 else None
    for k, t in enumerate(times):
        for name, col in (("Z", Z[:, k]), ("rho2", rho2[:, k]), ("gap2", gap2[:, k]), ("rho1sq_minus_rho2", deficit[:, k])):
            report.add(model, N, t, name, *mean_se(col))
        if e0 is not None:
            m, se = mean_se(deficit[:, k])
            report.add(model, N, t, "ode_residual", m - second_moment_ode_solution(N, t, e0, z_ref), se)
        if t > 0 and feller_samples > 0:
            ref = feller_exact_sample(z_ref, t, SeedSpec(seed).generator("feller", model, N, float(t)),
                                      size=feller_samples)
            d = distance_suite(Z[:, k], ref)
            report.add(model, N, t, "W1_feller", d.wasserstein1)
            report.add(model, N, t, "KS_p_feller", d.ks_pvalue)
    t_end = float(times[-1])
    report.add(model, N, t_end, "occupation_gap2", *mean_se([float(r.occupation.values["gap2"]) for r in records]))
    jumps = np.array([float(r.qv.jump_sq_sum) for r in records])
    report.add(model, N, t_end, "qv_jump_sq", *mean_se(jumps))
    for label, c in (("qv_compensator", QV_COEFFICIENT), ("qv_compensator_3_2", QV_COEFFICIENT_PRINTED)):
        comp = np.array([float(r.qv.compensator(c)) for r in records])
        report.add(model, N, t_end, label, *mean_se(comp))


def run_experiment(config: ExperimentConfig, write: bool = True):
    """Simulate every (model, N) cell; returns ``(report, raw_csvs)`` with
    raw CSV text keyed by ``(model, N)``."""
    report = ConvergenceReport()
    raw: dict[tuple[str, int], str] = {}
    finals: dict[tuple[str, int], np.ndarray] = {}
    workers = worker_count(config.workers)
    for N in config.N:
        for model in config.models:
            recs = simulate_replicates(model, config.params(N), config.init, config.t_grid,
                                       config.replicates, config.seed, workers)
            raw[(model, N)] = raw_csv(recs)
            finals[(model, N)] = (stack(recs, "Z")[:, -1], stack(recs, "rho2")[:, -1])
            summarize(report, model, N, config.init, recs, config.feller_samples, config.seed)
            if write:
                write_text(Path(config.out_dir) / f"raw_{model}_N{N}.csv", raw[(model, N)])
                write_text(Path(config.out_dir) / f"sidecar_{model}_N{N}.csv", sidecar_csv(recs))
        if config.model == "both" and config.t_end > 0:
            (zj, rj), (zg, rg) = finals[("jump", N)], finals[("graph", N)]
            report.add("both", N, config.t_end, "cross_KS_p_Z", distance_suite(zj, zg).ks_pvalue)
            (mj, sj), (mg, sg) = mean_se(rj), mean_se(rg)
            report.add("both", N, config.t_end, "cross_rho2_diff", mj - mg, math.hypot(sj, sg))
    if write:
        write_text(Path(config.out_dir) / "report.csv", report.to_csv())
    return report, raw
