import numpy as np
import pytest
from scipy import stats

from gemoran import _kernels as K
from gemoran.model_core import SeedSpec


def _chisq_uniform(draws, n):
    counts = np.bincount(draws, minlength=n)
    return stats.chisquare(counts).pvalue


@pytest.mark.parametrize("n", [1, 3, 7, 400, 5000])
def test_uniform_index(n):
    rng = SeedSpec(11).generator("uniform", n)
    draws = np.array([K.uniform_index(rng, n) for _ in range(50_000)])
    assert draws.min() >= 0 and draws.max() < n
    if n > 1:
        assert _chisq_uniform(draws, n) > 1e-3


@pytest.mark.parametrize("n", [0, 1, 5, 53, 54, 200])
def test_binomial_half(n):
    rng = SeedSpec(12).generator("binom", n)
    draws = np.array([K.binomial_half(rng, n) for _ in range(20_000)])
    assert draws.min() >= 0 and draws.max() <= n
    if n == 0:
        assert (draws == 0).all()
        return
    pmf = stats.binom.pmf(np.arange(n + 1), n, 0.5)
    keep = pmf * draws.size >= 5
    obs = np.bincount(draws, minlength=n + 1)
    f_obs = np.append(obs[keep], obs[~keep].sum())
    f_exp = np.append(pmf[keep], pmf[~keep].sum()) * draws.size
    if f_exp[-1] == 0:
        f_obs, f_exp = f_obs[:-1], f_exp[:-1]
    assert stats.chisquare(f_obs, f_exp).pvalue > 1e-3


def test_set_count_updates_power_sums():
    counts = np.array([1, 2, 3], dtype=np.int64)
    sums = np.array([6, 14, 36, 98], dtype=np.int64)
    K.set_count(counts, sums, 1, 5)
    assert counts.tolist() == [1, 5, 3]
    assert sums.tolist() == [9, 35, 153, 707]


def test_total_rates():
    assert K.total_rate(K.MODEL_JUMP, 10, 0, 0.0, 0.0, 0.0) == 50
    assert K.total_rate(K.MODEL_GRAPH, 10, 0, 0.0, 0.0, 0.0) == 50
    assert K.total_rate(K.MODEL_GRAPH_UNIT, 10, 0, 0.0, 0.0, 0.0) == 100
    assert K.total_rate(K.MODEL_EXTENDED, 10, 7, 1.0, 0.5, 2.0) == 50 + 10 + 2.5 * 7
