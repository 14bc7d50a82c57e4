import math

import numpy as np
import pytest
from scipy import stats

from gemoran import feller as F
from gemoran.model_core import ModelParams, SeedSpec


def gen(*roles):
    return SeedSpec(99).generator(*roles)


def test_zero_is_absorbing():
    assert F.feller_exact_sample(0.0, 1.0, gen()) == 0.0
    assert (F.feller_exact_sample(0.0, 1.0, gen(), size=100) == 0).all()
    assert (F.feller_em_path(0.0, 1.0, 0.01, gen()) == 0).all()


def test_exact_sampler_errors():
    with pytest.raises(ValueError):
        F.feller_exact_sample(1.0, 0.0, gen())
    with pytest.raises(ValueError):
        F.feller_exact_sample(-1.0, 1.0, gen())


def test_zero_probability_z1_t2():
    x = F.feller_exact_sample(1.0, 2.0, gen("p0"), size=100_000)
    p = math.exp(-1)
    assert abs((x == 0).mean() - p) <= 3 * math.sqrt(p * (1 - p) / x.size)


def test_mean_and_variance_z2():
    x = F.feller_exact_sample(2.0, 0.5, gen("mv"), size=100_000)
    assert abs(x.mean() - 2) <= 3 * x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.var(ddof=1) - 1) <= 0.05
    assert (x >= 0).all()


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_laplace_transform(lam):
    x = F.feller_exact_sample(2.0, 0.5, gen("lt", lam), size=100_000)
    v = np.exp(-lam * x)
    assert abs(v.mean() - F.laplace_transform(2.0, 0.5, lam)) <= 3 * v.std(ddof=1) / math.sqrt(v.size)


def test_scaling_self_similarity():
    c = 2.0
    a = F.feller_exact_sample(2.0, 1.0, gen("ss", 1), size=20_000)
    b = c * F.feller_exact_sample(1.0, 0.5, gen("ss", 2), size=20_000)
    assert stats.ks_2samp(a, b, method="asymp").pvalue > 1e-3


def test_em_path_shape_and_dt_checks():
    p = F.feller_em_path(2.0, 0.5, 1e-3, gen("path"))
    assert p.shape == (501,) and p[0] == 2.0 and (p >= 0).all()
    with pytest.raises(ValueError):
        F.feller_em_path(2.0, 0.5, 0.01, gen())
    with pytest.raises(ValueError):
        F.feller_em_path(2.0, 0.5, 0.0, gen())
    with pytest.raises(ValueError):
        F.feller_em_path(2.0, 0.5, 0.0003, gen())


@pytest.mark.slow
def test_em_matches_exact():
    em = F.em_endpoints(F.DiffusionParams(2.0), 0.5, 1e-4, 10_000, gen("em"))
    ex = F.feller_exact_sample(2.0, 0.5, gen("ex"), size=10_000)
    assert stats.ks_2samp(em, ex, method="asymp").pvalue > 1e-3
    assert abs(em.mean() - 2) <= 3 * em.std(ddof=1) / 100


def test_em_endpoints_agree_with_single_paths():
    ends = F.em_endpoints(F.DiffusionParams(1.5, 0.3, -0.2), 0.2, 1e-3, 1, gen("one"))
    single = F.drifted_feller_em(F.DiffusionParams(1.5, 0.3, -0.2), 0.2, 1e-3, gen("one"))
    assert ends[0] == pytest.approx(single, rel=1e-12)


def test_driftless_reduces_to_em_path():
    a = F.drifted_feller_em(F.DiffusionParams(2.0), 0.5, 1e-3, gen("same"))
    b = F.feller_em_path(2.0, 0.5, 1e-3, gen("same"))[-1]
    assert a == b


@pytest.mark.parametrize("p, t, target", [
    (F.DiffusionParams(2.0, 1.0, 0.0), 0.5, 2.5),
    (F.DiffusionParams(2.0, 0.0, -1.0), 1.0, 2 * math.exp(-1)),
])
def test_drifted_means(p, t, target):
    x = F.em_endpoints(p, t, 1e-3, 20_000, gen("drift", t))
    assert abs(x.mean() - target) <= 3 * x.std(ddof=1) / math.sqrt(x.size)
    assert p.mean(t) == pytest.approx(target)


def test_diffusion_params():
    with pytest.raises(ValueError):
        F.DiffusionParams(-1.0)
    d = F.DiffusionParams.for_model(ModelParams(10, mu=1.0, nu=0.5, beta=0.2, alpha=0.1), 2.0)
    assert d.mu_eff == 1.0 and d.linear_eff == pytest.approx(0.2)
    assert F.DiffusionParams(1.0).critical
    assert F.mean_drift_extended(ModelParams(10, alpha=1.0), 2.0, 2.0) == -1.0


def test_closed_forms():
    assert F.zero_probability(1.0, 2.0) == pytest.approx(math.exp(-1))
    assert F.variance(2.0, 0.5) == 1.0
    assert F.laplace_transform(2.0, 0.5, 0.0) == 1.0
