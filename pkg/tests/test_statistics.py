import math
from fractions import Fraction

import numpy as np
import pytest

from gemoran.model_core import Population, SeedSpec, TypeDistribution
from gemoran.statistics import (FactorialMoments, OccupationAccumulator, QuadraticVariationTracker, distance_suite,
                                factorial_moment, generating_value, mean_se, occupation_update,
                                poisson_characterization_gap, poissonization_gap, population_moments,
                                second_moment_ode_solution, tv_to_poisson)

POI2 = TypeDistribution.poisson(2.0, 40)


def test_factorial_moments_of_delta3():
    x = TypeDistribution.delta(3)
    assert [factorial_moment(x, j) for j in (1, 2, 3)] == [3, 6, 6]
    assert all(factorial_moment(TypeDistribution.delta(0), j) == 0 for j in (1, 2, 3))
    with pytest.raises(ValueError):
        factorial_moment(x, 4)


def test_poisson_factorial_moment():
    assert factorial_moment(POI2, 2) == pytest.approx(4.0, abs=1e-9)


def test_from_power_sums_matches_direct():
    pop = Population(np.array([0, 1, 1, 4, 2]))
    m = population_moments(pop)
    assert m == FactorialMoments.of(TypeDistribution.from_counts(pop.counts))


@pytest.mark.parametrize("k, s", [(0, Fraction(1, 3)), (3, Fraction(1, 2)), (5, 0.2)])
def test_generating_value_delta(k, s):
    assert generating_value(TypeDistribution.delta(k), s) == pytest.approx((1 - s) ** k)


def test_generating_value_poisson_and_zero():
    for s in (0.1, 0.5, 1.0):
        assert generating_value(POI2, s) == pytest.approx(math.exp(-2 * s), abs=1e-12)
    assert generating_value(TypeDistribution.delta(4), 0) == 1
    with pytest.raises(ValueError):
        generating_value(POI2, 1.5)


def test_poissonization_gap():
    assert poissonization_gap(POI2) == pytest.approx(0, abs=1e-9)
    assert poissonization_gap(TypeDistribution.delta(4)) == 4
    half = TypeDistribution({0: Fraction(1, 2), 2: Fraction(1, 2)})
    assert poissonization_gap(half) == 0
    # splitting identity tells this non-Poisson law apart
    assert poisson_characterization_gap(half, [0.5]) > 1e-3
    assert poisson_characterization_gap(POI2, [0.3, 0.7]) < 1e-12


def test_tv_to_poisson():
    assert tv_to_poisson(POI2) <= 1e-9
    assert tv_to_poisson(TypeDistribution.delta(0)) == 0
    assert tv_to_poisson(TypeDistribution.delta(1)) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert tv_to_poisson(TypeDistribution.delta(2)) == pytest.approx(1 - 2 * math.exp(-2), abs=1e-12)


def test_occupation_one_is_exact():
    acc = OccupationAccumulator()
    t = 0.0
    for t_next in (0.3, 1.1, 2.5):
        acc = occupation_update(acc, t, t_next, {"one": 1, "rho1": 0, "rho2": 0, "rho3": 0, "gap2": 0})
        t = t_next
    assert float(acc.values["one"]) == pytest.approx(1 - math.exp(-2.5), abs=1e-15)
    assert acc.tail_bound(1.0) == pytest.approx(math.exp(-2.5))


def test_occupation_two_piece_path():
    acc = OccupationAccumulator(names=("rho1",))
    acc = occupation_update(acc, 0.0, 1.0, {"rho1": 1})
    acc = occupation_update(acc, 1.0, 2.0, {"rho1": 2})
    expected = (1 - math.exp(-1)) + 2 * (math.exp(-1) - math.exp(-2))
    assert float(acc.values["rho1"]) == pytest.approx(expected, abs=1e-15)


def test_occupation_gap_on_poisson_path_is_zero():
    acc = OccupationAccumulator(names=("gap2",))
    acc = occupation_update(acc, 0.0, 3.0, {"gap2": 0})
    assert acc.values["gap2"] == 0


def test_occupation_rejects_time_reversal():
    acc = occupation_update(OccupationAccumulator(names=("one",)), 0.0, 1.0, {"one": 1})
    with pytest.raises(ValueError):
        occupation_update(acc, 1.0, 0.5, {"one": 1})
    with pytest.raises(ValueError):
        occupation_update(acc, 0.5, 2.0, {"one": 1})


def test_occupation_merge_is_exact_and_associative():
    parts = []
    for k in range(3):
        acc = occupation_update(OccupationAccumulator(names=("one", "rho1")), 0.0, 1.0, {"one": 1, "rho1": k + 0.1})
        parts.append(acc)
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[0].merge(parts[1].merge(parts[2]))
    assert left.values == right.values and left.replicates == 3


def test_qv_tracker():
    qv = QuadraticVariationTracker()
    qv.advance(0.5, FactorialMoments(Fraction(2), Fraction(4), Fraction(8)))
    qv.jump(Fraction(1, 10))
    qv.advance(1.0, FactorialMoments(Fraction(2), Fraction(2), Fraction(0)))
    assert qv.jump_sq_sum == Fraction(1, 100)
    assert qv.int_rho1 == 2
    assert qv.compensator() == 2 + Fraction(3, 4) * Fraction(-1)
    assert qv.compensator(Fraction(3, 2)) == Fraction(1, 2)
    with pytest.raises(ValueError):
        qv.advance(0.2, FactorialMoments(0, 0, 0))


def test_printed_compensator_can_be_negative():
    # delta_k: rho1 + 3/2 (rho2 - rho1^2) = k - 3k/2 < 0
    qv = QuadraticVariationTracker()
    m = FactorialMoments.of(TypeDistribution.delta(4))
    qv.advance(1.0, m)
    assert qv.compensator(Fraction(3, 2)) == -2
    assert qv.compensator() == 1


def test_ode_solution():
    assert second_moment_ode_solution(20, 0.0, 1.7, 2.0) == 1.7
    assert second_moment_ode_solution(20, 200.0, 1.7, 2.0) == pytest.approx(8 / 23)
    assert second_moment_ode_solution(1, 1.0, 1.0, 1.0) == pytest.approx(1.0)


@pytest.mark.filterwarnings("ignore:divide by zero:RuntimeWarning")
def test_distance_suite():
    a = np.linspace(0, 1, 101)
    d = distance_suite(a, a)
    assert d.ks_stat == 0 and d.wasserstein1 == 0
    assert distance_suite([0.0], [1.0]).wasserstein1 == 1
    rng = SeedSpec(1).generator()
    w = distance_suite(rng.random(10_000), rng.random(10_000) + 0.1).wasserstein1
    assert 0.08 <= w <= 0.12
    with pytest.raises(ValueError):
        distance_suite([], [1.0])


def test_mean_se():
    m, se = mean_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
