"""Brute-force generator of the GE-count jump process on small states.

``apply_generator`` enumerates every jump ``x -> x + (e_m - e_n)/N`` with its
rate and sums ``rate * (f(after) - f(x))`` in exact rational arithmetic, so
the closed-form drift identities can be checked with zero tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .model_core import TypeDistribution
from .statistics import factorial_moment, generating_value

MAX_SUPPORT = 12
MAX_N = 16


@dataclass(frozen=True)
class JumpEnumeration:
    """All jumps out of ``x``: (offspring type m, dying type n, rate)."""

    N: int
    jumps: tuple[tuple[int, int, Fraction], ...]

    @property
    def total_rate(self) -> Fraction:
        return sum((r for _, _, r in self.jumps), Fraction(0))


def offspring_law(x: TypeDistribution) -> dict[int, Fraction]:
    """Law of Bin(k+l, 1/2) with k, l i.i.d. from ``x``."""
    pair: dict[int, Fraction] = {}
    for (k, wk), (l, wl) in itertools.product(x.weights.items(), repeat=2):
        pair[k + l] = pair.get(k + l, 0) + wk * wl
    law: dict[int, Fraction] = {}
    for s, w in pair.items():
        scale = w / 2**s
        for m in range(s + 1):
            law[m] = law.get(m, 0) + scale * math.comb(s, m)
    return law


def _check_state(x: TypeDistribution, N: int) -> None:
    if not 1 <= N <= MAX_N:
        raise ValueError(f"brute-force enumeration needs 1 <= N <= {MAX_N}, got {N}")
    if not x.in_state_space(N):
        raise ValueError(f"x is not in E_{N} (weights must be multiples of 1/{N})")
    if x.support_max > MAX_SUPPORT:
        raise ValueError(f"support_max {x.support_max} exceeds {MAX_SUPPORT}")


def enumerate_jumps(x: TypeDistribution, N: int) -> JumpEnumeration:
    _check_state(x, N)
    q = offspring_law(x)
    half_n2 = Fraction(N * N, 2)
    jumps = tuple((m, n, half_n2 * xn * qm)
                  for n, xn in sorted(x.weights.items())
                  for m, qm in sorted(q.items()))
    return JumpEnumeration(N, jumps)


def shifted(x: TypeDistribution, m: int, n: int, N: int) -> TypeDistribution:
    w = dict(x.weights)
    step = Fraction(1, N)
    w[n] = w[n] - step
    w[m] = w.get(m, 0) + step
    return TypeDistribution({k: v for k, v in w.items() if v != 0})


# --------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class MomentFunctional:
    """A function of the type distribution, evaluated exactly.

    ``tag`` is one of ``rho1, rho1^2, rho2, rho3, rho2*rho1, rho1^3``,
    ``f_s`` (product of generating functions at ``s``) or ``g(rho1)``
    (polynomial with coefficients ``coeffs``, lowest degree first).
    """

    tag: str
    s: tuple = ()
    coeffs: tuple = ()

    def __post_init__(self):
        if self.tag not in _EVALUATORS:
            raise ValueError(f"unknown functional {self.tag!r}")
        if self.tag == "f_s" and not self.s:
            raise ValueError("f_s needs at least one s value")
        if self.tag == "g(rho1)" and not self.coeffs:
            raise ValueError("g(rho1) needs polynomial coefficients")

    @classmethod
    def psi_product(cls, s: Sequence) -> "MomentFunctional":
        return cls("f_s", s=tuple(s))

    @classmethod
    def polynomial(cls, coeffs: Sequence) -> "MomentFunctional":
        return cls("g(rho1)", coeffs=tuple(coeffs))

    def __call__(self, x: TypeDistribution):
        return _EVALUATORS[self.tag](self, x)


def _rho(j):
    return lambda f, x: factorial_moment(x, j)


def _poly(coeffs, z):
    out = 0
    for c in reversed(coeffs):
        out = out * z + c
    return out


_EVALUATORS: dict[str, Callable] = {
    "rho1": _rho(1),
    "rho2": _rho(2),
    "rho3": _rho(3),
    "rho1^2": lambda f, x: factorial_moment(x, 1) ** 2,
    "rho1^3": lambda f, x: factorial_moment(x, 1) ** 3,
    "rho2*rho1": lambda f, x: factorial_moment(x, 2) * factorial_moment(x, 1),
    "f_s": lambda f, x: math.prod((generating_value(x, s) for s in f.s), start=1),
    "g(rho1)": lambda f, x: _poly(f.coeffs, factorial_moment(x, 1)),
}


def apply_generator(x: TypeDistribution, N: int, f: MomentFunctional | Callable):
    """``G^N f(x)`` by explicit enumeration of all jumps."""
    enum = enumerate_jumps(x, N)
    base = f(x)
    total = 0
    for m, n, rate in enum.jumps:
        if m == n:
            continue
        total += rate * (f(shifted(x, m, n, N)) - base)
    return total


# --------------------------------------------------------------------------
# closed forms


def _moments(x):
    return factorial_moment(x, 1), factorial_moment(x, 2), factorial_moment(x, 3)


def _closed_rho1(x, N):
    return 0


def _closed_rho1sq(x, N):
    r1, r2, _ = _moments(x)
    return r1 + Fraction(3, 4) * (r2 - r1**2)


def _closed_rho2(x, N):
    r1, r2, _ = _moments(x)
    return Fraction(N, 4) * (r1**2 - r2)


def _closed_rho3(x, N):
    r1, r2, r3 = _moments(x)
    return Fraction(3 * N, 8) * (r2 * r1 - r3)


def _displayed_rho2rho1(x, N):
    r1, r2, r3 = _moments(x)
    return (Fraction(N, 4) * r1 * (r1**2 - r2) + Fraction(3, 2) * r2 + Fraction(1, 2) * r1**2
            + Fraction(5, 8) * r3 - Fraction(5, 8) * r2 * r1)


def _exact_rho2rho1(x, N):
    r1, r2, r3 = _moments(x)
    return (Fraction(N, 4) * r1 * (r1**2 - r2) + Fraction(3, 2) * r2 + Fraction(1, 2) * r1**2
            + Fraction(5, 8) * r3 - Fraction(3, 8) * r2 * r1 - Fraction(1, 4) * r1**3)


def _displayed_rho1cubed(x, N):
    r1, r2, r3 = _moments(x)
    return (Fraction(9, 4) * r2 * r1 - Fraction(9, 4) * r1**3 + 9 * r1**2
            + Fraction(1, N) * (-Fraction(3, 8) * r3 + Fraction(9, 8) * r2 * r1 - Fraction(3, 4) * r1**3
                                + Fraction(3, 8) * r1**2 - Fraction(9, 8) * r2))


def _exact_rho1cubed(x, N):
    r1, r2, r3 = _moments(x)
    return (Fraction(9, 4) * r2 * r1 - Fraction(9, 4) * r1**3 + 3 * r1**2
            + Fraction(1, N) * (-Fraction(3, 8) * r3 + Fraction(9, 8) * r2 * r1 - Fraction(3, 4) * r1**3
                                + Fraction(3, 4) * r1**2 - Fraction(3, 4) * r2))


IDENTITIES: dict[str, tuple[MomentFunctional, Callable]] = {
    "G_rho1": (MomentFunctional("rho1"), _closed_rho1),
    "G_rho1sq": (MomentFunctional("rho1^2"), _closed_rho1sq),
    "G_rho2": (MomentFunctional("rho2"), _closed_rho2),
    "G_rho3": (MomentFunctional("rho3"), _closed_rho3),
    # the two third-moment formulas as printed, and their exact versions
    "G_rho2rho1": (MomentFunctional("rho2*rho1"), _displayed_rho2rho1),
    "G_rho1cubed": (MomentFunctional("rho1^3"), _displayed_rho1cubed),
    "G_rho2rho1_exact": (MomentFunctional("rho2*rho1"), _exact_rho2rho1),
    "G_rho1cubed_exact": (MomentFunctional("rho1^3"), _exact_rho1cubed),
}
DISPLAYED_IDENTITIES = ("G_rho1", "G_rho1sq", "G_rho2", "G_rho3", "G_rho2rho1", "G_rho1cubed")


@dataclass(frozen=True)
class IdentityCheck:
    lhs: Fraction | float
    rhs: Fraction | float

    @property
    def abs_diff(self):
        return abs(self.lhs - self.rhs)


def check_identity(identity_tag: str, x: TypeDistribution, N: int) -> IdentityCheck:
    """Brute-force ``G^N f(x)`` against the closed form named by the tag."""
    if identity_tag not in IDENTITIES:
        raise ValueError(f"unknown identity {identity_tag!r}; known: {sorted(IDENTITIES)}")
    f, closed = IDENTITIES[identity_tag]
    return IdentityCheck(apply_generator(x, N, f), closed(x, N))


def _psi(x, s):
    return generating_value(x, s)


def _half(v):
    # keeps integer and rational arguments exact
    return v * Fraction(1, 2)


def order_operator(x: TypeDistribution, s: Sequence, i: int):
    """``G_{2-i} f_s(x)``: the coefficient of ``N^{2-i}`` in ``G^N f_s``.

    Sum over index sets J of size i and K subset of J of
    (-1)^{|J\\K|} psi^2_{(1-(1-s)_K)/2} psi_{1-(1-s)_{J\\K}}, with the untouched
    factors psi_{s_j}, j not in J, in front.
    """
    ell = len(s)
    total = 0
    for J in itertools.combinations(range(ell), i):
        outside = math.prod((_psi(x, s[j]) for j in range(ell) if j not in J), start=1)
        inner = 0
        for r in range(len(J) + 1):
            for Kset in itertools.combinations(J, r):
                rest = [j for j in J if j not in Kset]
                keep_k = math.prod((1 - s[j] for j in Kset), start=1)
                keep_rest = math.prod((1 - s[j] for j in rest), start=1)
                sign = -1 if len(rest) % 2 else 1
                inner += sign * _psi(x, _half(1 - keep_k)) ** 2 * _psi(x, 1 - keep_rest)
        total += outside * inner
    return _half(total)


def displayed_low_orders(x: TypeDistribution, s: Sequence):
    """The explicit ell=1 (G_1) and ell=2 (G_0) forms of the decomposition."""
    if len(s) == 1:
        (t,) = s
        return _half(_psi(x, _half(t)) ** 2 - _psi(x, t))
    if len(s) == 2:
        r, t = s
        joint = 1 - (1 - r) * (1 - t)
        return _half(_psi(x, joint) - _psi(x, _half(r)) ** 2 * _psi(x, t)
                     - _psi(x, r) * _psi(x, _half(t)) ** 2 + _psi(x, _half(joint)) ** 2)
    raise ValueError("displayed forms exist for ell = 1 and 2 only")


def psi_decomposition_check(x: TypeDistribution, N: int, s_vec: Sequence) -> IdentityCheck:
    """``G^N f_s`` by enumeration against ``sum_i N^{2-i} G_{2-i} f_s``.

    Rational ``s`` values keep both sides exact; float ``s`` gives a float
    comparison.
    """
    s = tuple(s_vec)
    if not 1 <= len(s) <= 3:
        raise ValueError("psi decomposition check supports 1 <= ell <= 3")
    if any(not 0 <= v <= 1 for v in s):
        raise ValueError("s values must lie in [0, 1]")
    lhs = apply_generator(x, N, MomentFunctional.psi_product(s))
    rhs = sum(Fraction(N) ** (2 - i) * order_operator(x, s, i) for i in range(1, len(s) + 1))
    return IdentityCheck(lhs, rhs)


def polynomial_drift_residual(coeffs: Sequence, x: TypeDistribution, N: int) -> float:
    """``|G^N (g o rho1)(x) - 1/2 (rho1 + 3/4 (rho2 - rho1^2)) g''(rho1)|``
    for the polynomial ``g`` with ``coeffs`` (lowest degree first, degree <= 4)."""
    coeffs = tuple(coeffs)
    if not coeffs or len(coeffs) > 5:
        raise ValueError("g must be a polynomial of degree <= 4 given by its coefficients")
    if not all(isinstance(c, (int, Fraction)) for c in coeffs):
        raise TypeError("polynomial coefficients must be integers or Fractions")
    lhs = apply_generator(x, N, MomentFunctional.polynomial(coeffs))
    r1, r2, _ = _moments(x)
    second = [k * (k - 1) * c for k, c in enumerate(coeffs)][2:]
    g2 = _poly(second, r1) if second else 0
    rhs = Fraction(1, 2) * (r1 + Fraction(3, 4) * (r2 - r1**2)) * g2
    return float(abs(lhs - rhs))
