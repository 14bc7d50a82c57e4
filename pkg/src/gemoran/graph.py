"""Individual-based bi-parental Moran graph.

Every ordered triple (h, i, j) carries a Poisson clock; superposing the N^3
clocks gives one exponential clock with a uniform triple.  With rate 1/(2N)
per triple (total N^2/2, the default) the type distribution has exactly the
law of the jump process; ``unit_clock=True`` uses rate 1/N per triple, which
is the same process run at twice the speed.  At a firing
each GE of parent i (and of j) tosses a fair coin and the successes replace
the content of h, computed from the pre-event counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from . import _kernels as K
from .model_core import ModelParams, Population, TypeDistribution, as_generator, type_distribution
from .simulation import Observer, TimeSeriesRecord, apply_event, simulate
from .statistics import tv_to_poisson


@dataclass(frozen=True)
class TripleEvent:
    time: float
    h: int
    i: int
    j: int
    new_count: int


def graph_rate(params: ModelParams, unit_clock: bool = False) -> float:
    return float(params.N) ** 2 * (1.0 if unit_clock else 0.5)


def step_graph(pop: Population, params: ModelParams, rng, t: float = 0.0, unit_clock: bool = False):
    if not params.neutral:
        raise ValueError("the graphical construction covers the neutral model only")
    time = t + rng.exponential(1.0 / graph_rate(params, unit_clock))
    h, i, j, new = K.graph_event(pop.counts, rng)
    apply_event(pop, int(h), int(new))
    return pop, TripleEvent(time, int(h), int(i), int(j), int(new))


def run_graph(pop0: Population, params: ModelParams, t_end: float, rng,
              observers: Sequence[Observer] = (), record_times: Sequence[float] | None = None,
              unit_clock: bool = False) -> TimeSeriesRecord:
    return simulate("graph_unit" if unit_clock else "graph", pop0, params, t_end, rng, record_times, observers)


@dataclass(frozen=True)
class PoissonizationProbe:
    t1: float
    distribution: TypeDistribution
    z: float
    tv: float
    tv_initial: float


def early_poissonization_probe(pop0: Population, params: ModelParams, rng,
                               unit_clock: bool = True) -> PoissonizationProbe:
    """Type histogram at ``t1 = log log N / N`` and its TV distance to
    Poi(Z^N_{t1}).  The time is measured on the rate-1/N triple clocks unless
    ``unit_clock`` is False."""
    if params.N < 16:
        raise ValueError("the probe needs N >= 16")
    t1 = math.log(math.log(params.N)) / params.N
    rec = run_graph(pop0, params, t1, as_generator(rng, "graph"), unit_clock=unit_clock)
    x = type_distribution(rec.final)
    return PoissonizationProbe(t1, x, rec.final.mean, tv_to_poisson(x), tv_to_poisson(type_distribution(pop0)))
