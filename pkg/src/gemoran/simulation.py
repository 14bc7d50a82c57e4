"""Shared event-loop driver and the per-run record type."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .model_core import ModelParams, Population, as_generator, count_limit
from .statistics import OccupationAccumulator, QuadraticVariationTracker

MODELS = {"jump": K.MODEL_JUMP, "graph": K.MODEL_GRAPH, "graph_unit": K.MODEL_GRAPH_UNIT,
          "extended": K.MODEL_EXTENDED}
EVENT_KINDS = {K.KIND_REPRODUCTION: "reproduction", K.KIND_ACQUISITION: "acquisition", K.KIND_LOSS: "loss"}

CSV_COLUMNS = ("replicate", "t", "Z", "rho2", "rho3", "gap2", "events_so_far")


@dataclass(frozen=True)
class EventSummary:
    """What an observer sees after each event."""

    time: float
    kind: str
    target: int
    parent_a: int
    parent_b: int
    new_count: int
    old_count: int
    N: int
    S1: int
    S2: int
    S3: int

    @property
    def Z(self) -> float:
        return self.S1 / self.N

    @property
    def rho2(self) -> float:
        return (self.S2 - self.S1) / self.N

    @property
    def rho3(self) -> float:
        return (self.S3 - 3 * self.S2 + 2 * self.S1) / self.N

    @property
    def delta_z(self) -> float:
        return (self.new_count - self.old_count) / self.N


Observer = Callable[[float, EventSummary], None]


@dataclass
class TimeSeriesRecord:
    """Statistics of one run at the requested record times plus exact
    path integrals up to ``t_end``."""

    model: str
    N: int
    t_end: float
    times: np.ndarray
    Z: np.ndarray
    rho2: np.ndarray
    rho3: np.ndarray
    gap2: np.ndarray
    events: np.ndarray
    n_events: int
    occupation: OccupationAccumulator
    qv: QuadraticVariationTracker
    final: Population

    def at(self, t: float) -> int:
        idx = np.flatnonzero(self.times == t)
        if idx.size == 0:
            raise KeyError(f"time {t} was not recorded")
        return int(idx[0])

    def rows(self, replicate: int):
        for k in range(self.times.size):
            yield (replicate, float(self.times[k]), float(self.Z[k]), float(self.rho2[k]),
                   float(self.rho3[k]), float(self.gap2[k]), int(self.events[k]))


def record_grid(record_times: Iterable[float] | None, t_end: float) -> np.ndarray:
    if t_end < 0:
        raise ValueError(f"t_end must be non-negative, got {t_end}")
    if record_times is None:
        grid = [0.0] if t_end == 0 else [0.0, float(t_end)]
    else:
        grid = [float(t) for t in record_times]
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("need at least one record time")
    if (np.diff(grid) <= 0).any():
        raise ValueError("record times must be strictly increasing")
    if grid[0] < 0 or grid[-1] > t_end:
        raise ValueError(f"record times must lie in [0, {t_end}]")
    return grid


def model_code(model: str, params: ModelParams) -> int:
    """``graph`` runs the triple clocks at rate 1/(2N), which reproduces the
    jump law; ``graph_unit`` uses rate 1/N per triple (total N^2)."""
    if model not in ("jump", "graph", "graph_unit"):
        raise ValueError(f"unknown model {model!r}")
    if model.startswith("graph"):
        if not params.neutral:
            raise ValueError("the graphical construction is implemented for the neutral model only")
        return MODELS[model]
    return K.MODEL_JUMP if params.neutral else K.MODEL_EXTENDED


def simulate(model: str, pop0: Population, params: ModelParams, t_end: float, rng,
             record_times: Sequence[float] | None = None, observers: Sequence[Observer] = (),
             trace_chunk: int = 4096) -> TimeSeriesRecord:
    """Exact continuous-time simulation of ``model`` from ``pop0`` to ``t_end``.

    ``pop0`` is not modified.  Observers, if any, are called as
    ``observer(t, EventSummary)`` after every event; they do not change the
    random stream, so a run with observers reproduces the run without.
    """
    if pop0.N != params.N:
        raise ValueError(f"population has N={pop0.N} but params.N={params.N}")
    code = model_code(model, params)
    rng = as_generator(rng, model)
    grid = record_grid(record_times, t_end)
    pop = pop0.copy()
    snaps = np.zeros((grid.size, K.N_SNAP))
    acc = np.zeros(K.N_ACC)
    rates = np.array([params.mu, params.nu, params.beta, params.alpha], dtype=np.float64)
    cap = trace_chunk if observers else 0
    trace_t = np.empty(cap, dtype=np.float64)
    trace_i = np.empty((cap, K.N_TRACE), dtype=np.int64)
    limit = count_limit(params.N)
    t, rec_i, events = 0.0, 0, 0
    while True:
        t, rec_i, events, n_trace, status = K.run_loop(
            code, pop.counts, pop.power_sums, rng, t, float(t_end), limit, rates,
            params.distinct_parents, grid, rec_i, snaps, acc, events, trace_t, trace_i)
        if n_trace:
            _feed(observers, trace_t[:n_trace], trace_i[:n_trace], params.N)
        if status == K.STATUS_OVERFLOW:
            raise OverflowError(f"a GE count exceeded {limit}; power sums would overflow int64")
        if status == K.STATUS_DONE:
            break
    occupation = OccupationAccumulator(
        values={"one": acc[K.ACC_ONE], "rho1": acc[K.ACC_RHO1], "rho2": acc[K.ACC_RHO2],
                "rho3": acc[K.ACC_RHO3], "gap2": acc[K.ACC_GAP2]},
        t_current=float(t_end))
    qv = QuadraticVariationTracker(acc[K.ACC_JUMP_SQ], acc[K.ACC_INT_RHO1], acc[K.ACC_INT_EXCESS],
                                   t_current=float(t_end))
    return TimeSeriesRecord(
        model=model, N=params.N, t_end=float(t_end), times=grid,
        Z=snaps[:, K.SNAP_Z].copy(), rho2=snaps[:, K.SNAP_RHO2].copy(),
        rho3=snaps[:, K.SNAP_RHO3].copy(), gap2=snaps[:, K.SNAP_GAP2].copy(),
        events=snaps[:, K.SNAP_EVENTS].astype(np.int64), n_events=int(events),
        occupation=occupation, qv=qv, final=pop)


def _feed(observers, times, rows, N):
    for t, r in zip(times, rows):
        summary = EventSummary(float(t), EVENT_KINDS[int(r[0])], int(r[1]), int(r[2]), int(r[3]),
                               int(r[4]), int(r[5]), N, int(r[6]), int(r[7]), int(r[8]))
        for obs in observers:
            obs(summary.time, summary)


def apply_event(pop: Population, target: int, new: int) -> int:
    """Set ``pop.counts[target] = new`` keeping the power sums; returns the
    old count."""
    if new < 0:
        raise ValueError("GE counts cannot become negative")
    if new > count_limit(pop.N):
        raise OverflowError(f"GE count {new} would overflow the int64 power sums")
    old = int(pop.counts[target])
    K.set_count(pop.counts, pop.power_sums, target, new)
    return old
