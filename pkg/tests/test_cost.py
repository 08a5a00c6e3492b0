import math

import numpy as np
import pytest

from jumplq.control import synthesize_feedback
from jumplq.cost import (CostAggregationError, compare_costs, estimate_cost,
                         running_cost)
from jumplq.model import CostWeights
from jumplq.riccati import solve_coupled_care
from jumplq.simulate import FeedbackLaw

from _models import SQRT2, coupled, noisy_scalar, scalar


def optimal(factory=scalar, **kw):
    system, weights = factory(**kw)
    G = solve_coupled_care(system, weights)
    return system, weights, G, synthesize_feedback(G, system, weights)


def test_running_cost_values():
    _, weights = coupled()
    assert running_cost(weights, 0, 0, [0.0, 0.0], [0.0]) == 0.0
    eye = CostWeights.create(M=[np.eye(2)], D=[np.eye(1)])
    assert running_cost(eye, 0, 0, [1.0, 1.0], [2.0]) == 6.0
    _, w1 = scalar()
    F = SQRT2 - 1
    assert running_cost(w1, 0, 0, [0.7], [-F * 0.7]) == pytest.approx(
        0.49 * (1 + F * F))


def test_zero_weight_zero_cost():
    system, _ = coupled()
    weights = CostWeights.create(M=[np.zeros((2, 2))] * 2, D=[[[1.0]]] * 2)
    est = estimate_cost(system, weights, None, [1.0, 1.0], 0, 2.0, 0.01, 4, 0)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_deterministic_decay_integral():
    system, weights = scalar(B=0.0)
    est = estimate_cost(system, weights, None, [1.0], 0, 20.0, 1e-3, 2, 0)
    assert est.mean == pytest.approx(0.5, abs=1e-3)
    assert est.tail_estimate < 1e-3 * est.mean


def test_noiseless_closed_loop_matches_value():
    system, weights, G, F = optimal()
    est = estimate_cost(system, weights, F, [1.0], 0, 20.0, 1e-4, 2, 0)
    assert est.std_error == 0.0
    assert est.mean == pytest.approx(G.at(0)[0, 0], abs=1e-4)


def test_quadratic_homogeneity():
    system, weights, _, F = optimal()
    c1 = estimate_cost(system, weights, F, [1.0], 0, 10.0, 1e-3, 2, 0).mean
    c3 = estimate_cost(system, weights, F, [3.0], 0, 10.0, 1e-3, 2, 0).mean
    assert c3 == pytest.approx(9 * c1, rel=1e-12)


def test_noisy_estimate_near_value():
    system, weights, G, F = optimal(noisy_scalar)
    est = estimate_cost(system, weights, F, [1.0], 0, 15.0, 1e-3, 400, 2)
    assert abs(est.mean - G.at(0)[0, 0]) <= 3 * est.std_error


def test_estimates_are_reproducible_across_threads():
    system, weights, _, F = optimal(coupled)
    a = estimate_cost(system, weights, F, [1.0, 0.0], 0, 3.0, 0.01, 40, 5)
    b = estimate_cost(system, weights, F, [1.0, 0.0], 0, 3.0, 0.01, 40, 5,
                      threads=3)
    assert a == b


def test_common_random_numbers_detect_suboptimal_gain():
    system, weights, _, F = optimal(noisy_scalar)
    worse = FeedbackLaw(F.F + 0.3)
    cmp = compare_costs(system, weights, F, worse, [1.0], 0, 10.0, 1e-2,
                        200, 3)
    lo, hi = cmp.ci95()
    assert lo > 0 and cmp.diff > 3 * cmp.diff_std_error
    assert cmp.to_dict()["ci95"] == [lo, hi]


def test_divergent_paths_refuse_aggregation():
    system, weights = scalar(A=30.0, sigma=0.5)
    with pytest.raises(CostAggregationError):
        estimate_cost(system, weights, None, [1.0], 0, 5.0, 0.01, 10, 0)


def test_needs_two_paths():
    system, weights = scalar()
    with pytest.raises(ValueError):
        estimate_cost(system, weights, None, [1.0], 0, 1.0, 0.1, 1, 0)


def test_coupled_value_identity():
    system, weights, G, F = optimal(coupled)
    x0 = np.array([1.0, 0.5])
    est = estimate_cost(system, weights, F, x0, 0, 15.0, 2e-3, 600, 8)
    v = float(x0 @ G.at(0) @ x0)
    assert abs(est.mean - v) <= 3 * est.std_error + 0.01 * v
    assert math.isfinite(est.tail_estimate)
