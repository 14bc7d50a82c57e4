"""Reference samplers for the Feller branching diffusion dZ = sqrt(Z) dW.

The exact transition law comes from the Laplace transform
``E exp(-lam Z_t) = exp(-z lam / (1 + lam t / 2))``: the exponent is the
generating function of a Poisson(2z/t) number of Exp(mean t/2) summands, so
``Z_t = Gamma(K, scale t/2)`` with ``K ~ Poisson(2z/t)`` and ``Z_t = 0`` on
``K = 0``.  Full-truncation Euler-Maruyama is kept as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model_core import ModelParams, as_generator


@dataclass(frozen=True)
class DiffusionParams:
    """``dZ = (mu_eff + linear_eff Z) dt + sqrt(Z) dW`` started at ``z0``."""

    z0: float
    mu_eff: float = 0.0
    linear_eff: float = 0.0

    def __post_init__(self):
        if not self.z0 >= 0:
            raise ValueError(f"z0 must be non-negative, got {self.z0}")
        if self.mu_eff < 0:
            raise ValueError("immigration rate must be non-negative")

    @classmethod
    def for_model(cls, params: ModelParams, z0: float) -> "DiffusionParams":
        # nu - beta - alpha; the individual-based selection rule actually
        # gives -alpha/2 * Var(x) in the drift (see mean_drift_extended)
        return cls(z0, params.mu, params.nu - params.beta - params.alpha)

    @property
    def critical(self) -> bool:
        return self.mu_eff == 0 and self.linear_eff == 0

    def mean(self, t: float) -> float:
        """``m' = mu + a m``."""
        a = self.linear_eff
        if a == 0:
            return self.z0 + self.mu_eff * t
        g = math.exp(a * t)
        return self.z0 * g + self.mu_eff * (g - 1) / a


def mean_drift_extended(params: ModelParams, rho1: float, var: float) -> float:
    """Leading-order drift of Z^N in the extended model at a state with
    mean ``rho1`` and type variance ``var``."""
    return params.mu + (params.nu - params.beta) * rho1 - 0.5 * params.alpha * var


# closed forms of the critical transition law


def laplace_transform(z: float, t: float, lam: float) -> float:
    return math.exp(-z * lam / (1 + lam * t / 2))


def zero_probability(z: float, t: float) -> float:
    return math.exp(-2 * z / t)


def variance(z: float, t: float) -> float:
    return z * t


def feller_exact_sample(z: float, t: float, rng, size: int | None = None):
    """Exact draw(s) of ``Z_t`` given ``Z_0 = z`` for the critical diffusion."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not z >= 0:
        raise ValueError(f"z must be non-negative, got {z}")
    rng = as_generator(rng, "feller")
    n = 1 if size is None else int(size)
    k = rng.poisson(2 * z / t, size=n)
    out = np.zeros(n)
    pos = k > 0
    out[pos] = rng.gamma(k[pos].astype(float), t / 2)
    return float(out[0]) if size is None else out


def _check_dt(t_end: float, dt: float) -> int:
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if not (dt > 0 and dt <= t_end / 100 * (1 + 1e-12)):
        raise ValueError(f"dt must lie in (0, t_end/100] = (0, {t_end / 100}], got {dt}")
    steps = int(round(t_end / dt))
    if abs(steps * dt - t_end) > 1e-9 * t_end:
        raise ValueError(f"t_end={t_end} is not a whole number of steps dt={dt}")
    return steps


@njit(cache=True)
def _em_kernel(z, mu, a, dt, xi, out):
    sq = math.sqrt(dt)
    out[0] = z
    for k in range(xi.size):
        zp = max(z, 0.0)
        z = z + (mu + a * zp) * dt + math.sqrt(zp) * sq * xi[k]
        if z < 0.0:
            z = 0.0
        out[k + 1] = z


def _em_path(p: DiffusionParams, t_end: float, dt: float, rng) -> np.ndarray:
    steps = _check_dt(t_end, dt)
    xi = rng.standard_normal(steps)
    out = np.empty(steps + 1)
    _em_kernel(float(p.z0), float(p.mu_eff), float(p.linear_eff), float(dt), xi, out)
    return out


def feller_em_path(z: float, t_end: float, dt: float, rng) -> np.ndarray:
    """Full-truncation Euler-Maruyama path on the grid ``0, dt, ..., t_end``."""
    return _em_path(DiffusionParams(z), t_end, dt, as_generator(rng, "feller-em"))


def drifted_feller_em(params: DiffusionParams, t_end: float, dt: float, rng) -> float:
    """Endpoint of the drifted diffusion; with zero drift and the same
    stream this is the endpoint of :func:`feller_em_path`."""
    return float(_em_path(params, t_end, dt, as_generator(rng, "feller-em"))[-1])


def em_endpoints(params: DiffusionParams, t_end: float, dt: float, n: int, rng) -> np.ndarray:
    """``n`` independent Euler endpoints, stepped together."""
    steps = _check_dt(t_end, dt)
    rng = as_generator(rng, "feller-em")
    z = np.full(n, float(params.z0))
    sq = math.sqrt(dt)
    for _ in range(steps):
        zp = np.maximum(z, 0.0)
        z += (params.mu_eff + params.linear_eff * zp) * dt + np.sqrt(zp) * sq * rng.standard_normal(n)
        np.maximum(z, 0.0, out=z)
    return z
