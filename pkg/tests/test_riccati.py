import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumplq.control import synthesize_feedback
from jumplq.model import CostWeights, RegimeSystem
from jumplq.riccati import (GainSet, IndefiniteIterate, NonConvergence, SolveOptions,
                            care_residual, solve_coupled_care,
                            solve_riccati_ode)

from _models import SQRT2, coupled, noisy_scalar, scalar, two_scalar


def test_scalar_residual_vanishes_at_root():
    system, weights = scalar()
    res = care_residual(system, weights, GainSet([[[[SQRT2 - 1]]]]))
    assert abs(res[0, 0, 0, 0]) <= 1e-12


def test_zero_gain_residual_is_M():
    system, weights = coupled()
    system = system.replace(Q=np.zeros((2, 2)), Sigma=[[], []],
                            poisson=[[], []])
    res = care_residual(system, weights, np.zeros((2, 2, 2)))
    assert np.array_equal(res[:, 0], np.stack([np.eye(2)] * 2))


def test_identical_decoupled_regimes_have_equal_residuals():
    system = RegimeSystem.create(A=[[[-1.0]]] * 2, B=[[[1.0]]] * 2)
    weights = CostWeights.create(M=[[[1.0]]] * 2, D=[[[1.0]]] * 2)
    res = care_residual(system, weights, np.full((2, 1, 1), 0.7))
    assert res[0, 0, 0, 0] == res[1, 0, 0, 0]


def test_scalar_care():
    G = solve_coupled_care(*scalar())
    assert G.at(0)[0, 0] == pytest.approx(SQRT2 - 1, abs=1e-10)
    assert G.is_symmetric()


def test_zero_weight_gives_zero_solution():
    system, _ = scalar(A=-2.0)
    G = solve_coupled_care(system, CostWeights.create(M=[[[0.0]]],
                                                      D=[[[1.0]]]))
    assert abs(G.at(0)[0, 0]) <= 1e-12


def test_symmetric_regimes_share_solution():
    system = RegimeSystem.create(A=[[[0.0, 1.0], [-1.0, -0.5]]] * 2,
                                 B=[[[0.0], [1.0]]] * 2,
                                 Q=[[-1.0, 1.0], [1.0, -1.0]])
    weights = CostWeights.create(M=[np.eye(2)] * 2, D=[[[1.0]]] * 2)
    G = solve_coupled_care(system, weights)
    assert np.allclose(G.at(0), G.at(1), atol=1e-9)


def test_coupled_model_solution():
    system, weights = coupled()
    G = solve_coupled_care(system, weights)
    res = np.linalg.norm(care_residual(system, weights, G), axis=(2, 3))
    assert res.max() <= 1e-10
    assert np.all(G.positive_definite())
    assert np.allclose(G.residual, res, atol=1e-12)


def test_noise_raises_cost():
    plain = solve_coupled_care(*scalar()).at(0)[0, 0]
    noisy = solve_coupled_care(*noisy_scalar()).at(0)[0, 0]
    assert noisy > plain


def test_closed_loop_is_hurwitz():
    system, weights = scalar(A=0.5)
    G = solve_coupled_care(system, weights)
    F = synthesize_feedback(G, system, weights)
    Acl = system.A[0] - system.B[0] @ F.gain(0)
    assert np.all(np.linalg.eigvals(Acl).real < 0)


def test_unstabilizable_system_does_not_converge():
    system = RegimeSystem.create(A=[[[1.0]]], B=[[[0.0]]])
    weights = CostWeights.create(M=[[[1.0]]], D=[[[1.0]]])
    with pytest.raises((NonConvergence, IndefiniteIterate,
                        np.linalg.LinAlgError)):
        solve_coupled_care(system, weights, SolveOptions(max_outer=20))


def test_options_are_validated():
    with pytest.raises(ValueError):
        SolveOptions(tol=0.0)
    with pytest.raises(ValueError):
        SolveOptions(max_outer=0)
    with pytest.raises(ValueError):
        SolveOptions(relaxation=1.5)


def test_relaxed_iteration_agrees():
    system, weights = coupled()
    a = solve_coupled_care(system, weights)
    b = solve_coupled_care(system, weights, SolveOptions(relaxation=0.6))
    assert np.allclose(a.G, b.G, atol=1e-9)


def test_gain_set_json_round_trip(tmp_path):
    G = solve_coupled_care(*coupled())
    G.save(tmp_path / "g.json", {"note": 1})
    back = GainSet.load(tmp_path / "g.json")
    assert np.array_equal(back.G, G.G)
    assert np.array_equal(back.residual, G.residual)
    lo, hi = back.eigen_bounds()
    assert np.all(lo > 0) and np.all(hi >= lo)


def test_riccati_ode_long_horizon_limit():
    traj = solve_riccati_ode(*scalar(), T=20.0, dt_g=0.01)
    assert traj.initial().at(0)[0, 0] == pytest.approx(SQRT2 - 1, abs=1e-6)
    assert traj.psd
    assert traj.G[-1].max() == 0.0


def test_riccati_ode_zero_weight():
    system, _ = scalar()
    traj = solve_riccati_ode(system, CostWeights.create(M=[[[0.0]]],
                                                        D=[[[1.0]]]),
                             T=2.0, dt_g=0.1)
    assert not np.any(traj.G)


def test_riccati_ode_rk4_order():
    def g0(h):
        return solve_riccati_ode(*scalar(), T=2.0, dt_g=h).initial().at(0)[0, 0]

    a, b, c = g0(0.05), g0(0.025), g0(0.0125)
    assert 14 <= abs(a - b) / abs(b - c) <= 18


def test_riccati_ode_matches_coupled_limit():
    system, weights = coupled()
    G = solve_coupled_care(system, weights)
    traj = solve_riccati_ode(system, weights, T=30.0, dt_g=0.01)
    assert np.allclose(traj.initial().G, G.G, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 20.0), st.floats(-1.5, 1.5), st.floats(0.0, 0.5))
def test_scaling_covariance(c, a, sigma):
    system, weights = scalar(A=a, sigma=sigma)
    G = solve_coupled_care(system, weights)
    Gc = solve_coupled_care(system, weights.scaled(c))
    assert np.allclose(Gc.G, c * G.G, rtol=1e-9, atol=1e-12)
    F = synthesize_feedback(G, system, weights).F
    Fc = synthesize_feedback(Gc, system, weights.scaled(c)).F
    assert np.allclose(F, Fc, rtol=1e-9, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_residual_within_tolerance_on_random_generators(q01, q10):
    system, weights = two_scalar(Q=[[-q01, q01], [q10, -q10]],
                                 K=[[[[1.0]], [[1.3]]], [[[0.7]], [[1.0]]]])
    G = solve_coupled_care(system, weights)
    assert np.abs(care_residual(system, weights, G)).max() <= 1e-10
    assert np.all(G.positive_definite())
