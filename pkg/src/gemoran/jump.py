"""Mean-field jump process: one individual dies, a pair of parents
(drawn with replacement) produces a Binomial(k+l, 1/2) offspring.

The neutral model runs on a constant N^2/2 clock.  Setting any of
``mu, nu, beta, alpha`` switches to competing reproduction, acquisition and
loss clocks (see :func:`step_extended`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import _kernels as K
from .model_core import ModelParams, Population
from .simulation import Observer, TimeSeriesRecord, apply_event, simulate


@dataclass(frozen=True)
class JumpEvent:
    time: float
    dying: int
    parent_a: int
    parent_b: int
    offspring_count: int


@dataclass(frozen=True)
class AuxEvent:
    time: float
    kind: str  # "acquisition" or "loss"
    individual: int


def reproduction_rate(params: ModelParams) -> float:
    return params.N**2 / 2


def step_jump(pop: Population, params: ModelParams, rng, t: float = 0.0):
    """One neutral event from time ``t``; updates ``pop`` in place.

    Parents' counts are read before the dying individual is replaced, so
    with N=1 the single individual is both parents and the one replaced.
    """
    if not params.neutral:
        raise ValueError("step_jump is for the neutral model; use step_extended")
    time = t + rng.exponential(1.0 / reproduction_rate(params))
    n, a, b, m = K.jump_event(pop.counts, rng, params.distinct_parents)
    apply_event(pop, int(n), int(m))
    return pop, JumpEvent(time, int(n), int(a), int(b), int(m))


def step_extended(pop: Population, params: ModelParams, rng, t: float = 0.0):
    """One event of the non-neutral model.

    Total rate N^2/2 + (N mu + nu S_1) + beta S_1.  Reproduction parents are
    picked by rejection with acceptance ``(1-alpha/N)^k / w_max``;
    acquisition targets individuals with probability proportional to
    ``mu + nu k``, loss proportional to ``k``.  Returns a
    :class:`JumpEvent` or an :class:`AuxEvent`.
    """
    s1 = int(pop.power_sums[0])
    rate = float(K.total_rate(K.MODEL_EXTENDED, params.N, s1, params.mu, params.nu, params.beta))
    time = t + rng.exponential(1.0 / rate)
    kind, target, a, b, new = K.extended_event(pop.counts, s1, rng, params.mu, params.nu,
                                               params.beta, params.alpha, params.distinct_parents)
    apply_event(pop, int(target), int(new))
    if kind == K.KIND_REPRODUCTION:
        return pop, JumpEvent(time, int(target), int(a), int(b), int(new))
    return pop, AuxEvent(time, "acquisition" if kind == K.KIND_ACQUISITION else "loss", int(target))


def run_jump(pop0: Population, params: ModelParams, t_end: float, rng,
             observers: Sequence[Observer] = (), record_times: Sequence[float] | None = None
             ) -> TimeSeriesRecord:
    """Simulate to ``t_end``; non-neutral ``params`` use the extended clocks."""
    return simulate("jump", pop0, params, t_end, rng, record_times, observers)
