"""Core state types, parameter validation and seeded random streams.

A population is stored per individual: ``counts[i]`` is the number of
genetic elements (GEs) carried by individual ``i``.  The type distribution
``x`` (fraction of individuals of each type) is derived from it on demand.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Mapping, Sequence

import numpy as np

INT64_MAX = np.iinfo(np.int64).max


def count_limit(N: int) -> int:
    """Largest GE count for which ``N * count**4`` still fits in int64."""
    c = int((INT64_MAX // N) ** 0.25) + 2
    while N * c**4 > INT64_MAX:
        c -= 1
    return c


# --------------------------------------------------------------------------
# random streams


def _role_key(role) -> int:
    if isinstance(role, (int, np.integer)):
        if role < 0:
            raise ValueError("integer stream roles must be non-negative")
        return int(role)
    return zlib.crc32(str(role).encode("utf-8"))


@dataclass(frozen=True)
class SeedSpec:
    """Key of a replicate's random streams.

    ``generator(*roles)`` is a pure function of ``(master_seed,
    replicate_index, roles)``; distinct keys give independent Philox
    streams through :class:`numpy.random.SeedSequence` spawn keys.
    """

    master_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.replicate_index) < 0:
            raise ValueError("replicate_index must be non-negative")

    def seed_sequence(self, *roles) -> np.random.SeedSequence:
        key = (int(self.replicate_index),) + tuple(_role_key(r) for r in roles)
        return np.random.SeedSequence(int(self.master_seed), spawn_key=key)

    def generator(self, *roles) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence(*roles)))


def as_generator(rng, *roles) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeedSpec):
        return rng.generator(*roles)
    if isinstance(rng, (int, np.integer)):
        return SeedSpec(int(rng)).generator(*roles)
    raise TypeError(f"cannot build a random stream from {type(rng).__name__}")


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ModelParams:
    """Population size plus the optional non-neutral rates.

    ``mu`` and ``nu`` give the per-individual acquisition rate ``mu + k*nu``,
    ``beta`` the per-GE loss rate and ``alpha`` the selection coefficient in
    the parent weights ``(1 - alpha/N)**k``.  ``distinct_parents`` switches
    from with-replacement parent sampling to two distinct parents.
    """

    N: int
    mu: float = 0.0
    nu: float = 0.0
    beta: float = 0.0
    alpha: float = 0.0
    distinct_parents: bool = False

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise TypeError("N must be an integer")
        if self.N < 1:
            raise ValueError(f"population size must be positive, got N={self.N}")
        for name in ("mu", "nu", "beta"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a non-negative finite rate, got {v}")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.alpha != 0 and abs(self.alpha) >= self.N:
            raise ValueError(f"|alpha| must be < N (got alpha={self.alpha}, N={self.N})")
        if self.distinct_parents and self.N < 2:
            raise ValueError("distinct parents need N >= 2")

    @property
    def neutral(self) -> bool:
        return self.mu == 0 and self.nu == 0 and self.beta == 0 and self.alpha == 0


# --------------------------------------------------------------------------
# type distributions


@dataclass(frozen=True)
class TypeDistribution:
    """Finitely supported law on GE counts, ``weights[k] = x_k``.

    Weights are :class:`~fractions.Fraction` when built from a population
    (so ``N * x_k`` is an integer) and floats for reference laws.
    """

    weights: Mapping[int, Real]

    def __post_init__(self):
        if not self.weights:
            raise ValueError("empty type distribution")
        for k, w in self.weights.items():
            if k < 0:
                raise ValueError(f"negative type {k}")
            if w < 0:
                raise ValueError(f"negative weight at type {k}")
        total = sum(self.weights.values())
        if self.exact:
            if total != 1:
                raise ValueError(f"weights sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {float(total)!r}, not 1")

    @classmethod
    def from_counts(cls, counts) -> "TypeDistribution":
        counts = np.asarray(counts)
        if counts.size == 0:
            raise ValueError("empty population")
        values, mult = np.unique(counts, return_counts=True)
        N = int(counts.size)
        return cls({int(k): Fraction(int(c), N) for k, c in zip(values, mult)})

    @classmethod
    def from_weights(cls, weights: Mapping[int, Real] | Sequence[Real]) -> "TypeDistribution":
        if not isinstance(weights, Mapping):
            weights = dict(enumerate(weights))
        return cls({int(k): w for k, w in weights.items() if w != 0})

    @classmethod
    def delta(cls, k: int) -> "TypeDistribution":
        return cls({int(k): Fraction(1)})

    @classmethod
    def poisson(cls, lam: float, truncation: int) -> "TypeDistribution":
        """Poisson(lam) restricted to ``0..truncation`` and renormalised."""
        from scipy.stats import poisson

        if lam < 0:
            raise ValueError("Poisson parameter must be non-negative")
        pmf = poisson.pmf(np.arange(truncation + 1), lam)
        pmf = pmf / pmf.sum()
        return cls.from_weights({k: float(p) for k, p in enumerate(pmf)})

    @property
    def exact(self) -> bool:
        return all(isinstance(w, (int, Fraction)) for w in self.weights.values())

    @property
    def support_max(self) -> int:
        return max(k for k, w in self.weights.items() if w > 0)

    @property
    def support(self) -> list[int]:
        return sorted(k for k, w in self.weights.items() if w > 0)

    def __getitem__(self, k: int):
        return self.weights.get(k, 0)

    def in_state_space(self, N: int) -> bool:
        """Membership in E_N: every ``N * x_k`` is a non-negative integer."""
        if not self.exact:
            return False
        return all((N * Fraction(w)).denominator == 1 for w in self.weights.values())

    def dense(self, size: int | None = None) -> np.ndarray:
        size = self.support_max + 1 if size is None else size
        out = np.zeros(size)
        for k, w in self.weights.items():
            if k < size:
                out[k] = float(w)
        return out


# --------------------------------------------------------------------------
# populations


def recompute_power_sums(pop_or_counts) -> tuple[int, int, int, int]:
    """Exact ``S_p = sum_i counts_i**p`` for p = 1..4 from scratch.

    Raises OverflowError when a sum does not fit the int64 storage used by
    the incremental update.
    """
    counts = getattr(pop_or_counts, "counts", pop_or_counts)
    vals = [int(c) for c in np.asarray(counts).ravel()]
    sums = tuple(sum(v**p for v in vals) for p in (1, 2, 3, 4))
    if sums[3] > INT64_MAX:
        raise OverflowError(f"S_4 = {sums[3]} exceeds int64 (max count {max(vals)})")
    return sums


@dataclass
class Population:
    """GE counts of ``N`` individuals with incrementally kept power sums.

    Mutated in place by the step functions; use :meth:`copy` to keep a
    snapshot.
    """

    counts: np.ndarray
    power_sums: np.ndarray = field(default=None)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64).ravel()
        if counts.size == 0:
            raise ValueError("empty population (N=0)")
        if (counts < 0).any():
            raise ValueError("GE counts must be non-negative")
        if counts.max() > count_limit(counts.size):
            raise OverflowError("GE counts too large for exact int64 power sums")
        self.counts = counts
        if self.power_sums is None:
            self.power_sums = np.array(recompute_power_sums(counts), dtype=np.int64)
        else:
            self.power_sums = np.array(self.power_sums, dtype=np.int64)

    @property
    def N(self) -> int:
        return int(self.counts.size)

    @property
    def mean(self) -> float:
        """Average GE number per individual (Z^N)."""
        return int(self.power_sums[0]) / self.N

    def copy(self) -> "Population":
        return Population(self.counts.copy(), self.power_sums.copy())

    def consistent(self) -> bool:
        return tuple(int(s) for s in self.power_sums) == recompute_power_sums(self.counts)


def type_distribution(pop: Population) -> TypeDistribution:
    return TypeDistribution.from_counts(pop.counts)


# --------------------------------------------------------------------------
# initial conditions


INIT_KINDS = ("explicit", "delta", "poisson_truncated")


@dataclass(frozen=True)
class InitSpec:
    """Initial condition: explicit counts, all individuals of one type, or
    i.i.d. Poisson(lam) conditioned on ``<= truncation``."""

    kind: str
    value: int | tuple[int, ...] | None = None
    lam: float | None = None
    truncation: int | None = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"unknown init kind {self.kind!r}; expected one of {INIT_KINDS}")
        if self.kind == "explicit":
            if self.value is None or isinstance(self.value, (int, np.integer)):
                raise ValueError("explicit init needs a sequence of counts")
            if any(int(v) < 0 for v in self.value):
                raise ValueError("explicit counts must be non-negative")
            object.__setattr__(self, "value", tuple(int(v) for v in self.value))
        elif self.kind == "delta":
            if self.value is None or int(self.value) < 0:
                raise ValueError("delta init needs a non-negative integer value")
        else:
            if self.lam is None or self.lam < 0:
                raise ValueError("poisson_truncated init needs lambda >= 0")
            if self.truncation is None or self.truncation < 0:
                raise ValueError("poisson_truncated init needs an explicit truncation >= 0")

    @classmethod
    def explicit(cls, counts) -> "InitSpec":
        return cls("explicit", tuple(int(c) for c in counts))

    @classmethod
    def delta(cls, k: int) -> "InitSpec":
        return cls("delta", int(k))

    @classmethod
    def poisson_truncated(cls, lam: float, truncation: int = 30) -> "InitSpec":
        return cls("poisson_truncated", lam=float(lam), truncation=int(truncation))

    @property
    def deterministic(self) -> bool:
        return self.kind != "poisson_truncated"

    @property
    def mean(self) -> float:
        """Expected initial Z^N."""
        if self.kind == "explicit":
            return sum(self.value) / len(self.value)
        if self.kind == "delta":
            return float(self.value)
        return TypeDistribution.poisson(self.lam, self.truncation).dense() @ np.arange(self.truncation + 1)

    def describe(self) -> str:
        if self.kind == "explicit":
            return "explicit(" + ",".join(map(str, self.value)) + ")"
        if self.kind == "delta":
            return f"delta({self.value})"
        return f"poisson_truncated(lambda={self.lam:g},truncation={self.truncation})"


def parse_init_spec(cfg: Mapping[str, str]) -> InitSpec:
    """Build an :class:`InitSpec` from flat ``init.*`` config keys."""
    kind = cfg.get("init.kind")
    if kind is None:
        raise ValueError("missing key init.kind")
    kind = kind.strip()
    if kind == "explicit":
        raw = cfg.get("init.value", "")
        return InitSpec.explicit(int(v) for v in raw.replace(",", " ").split())
    if kind == "delta":
        return InitSpec.delta(int(cfg.get("init.value", "")))
    if kind == "poisson_truncated":
        if "init.truncation" not in cfg:
            raise ValueError("poisson_truncated init needs init.truncation")
        return InitSpec.poisson_truncated(float(cfg.get("init.lambda", "")), int(cfg["init.truncation"]))
    raise ValueError(f"unknown init kind {kind!r}; expected one of {INIT_KINDS}")


def _truncated_poisson(rng: np.random.Generator, lam: float, truncation: int, size: int) -> np.ndarray:
    out = rng.poisson(lam, size)
    bad = out > truncation
    while bad.any():
        out[bad] = rng.poisson(lam, int(bad.sum()))
        bad = out > truncation
    return out


def init_population(spec: InitSpec, N: int, seed=None) -> Population:
    """Draw (or copy) the initial GE counts.

    ``seed`` may be a :class:`SeedSpec` (the ``"init"`` stream is used), a
    Generator, or an int; it is ignored for deterministic specs.
    """
    if N < 1:
        raise ValueError(f"empty population (N={N})")
    if spec.kind == "explicit":
        if len(spec.value) != N:
            raise ValueError(f"explicit init has {len(spec.value)} counts but N={N}")
        return Population(np.array(spec.value, dtype=np.int64))
    if spec.kind == "delta":
        return Population(np.full(N, int(spec.value), dtype=np.int64))
    if seed is None:
        raise ValueError("random initial condition needs a seed")
    rng = as_generator(seed, "init")
    return Population(_truncated_poisson(rng, spec.lam, spec.truncation, N).astype(np.int64))
