import numpy as np
import pytest

from jumplq.control import (closed_loop, load_feedback, lyapunov_value,
                            save_feedback, synthesize_feedback)
from jumplq.riccati import GainSet, solve_coupled_care

from _models import SQRT2, coupled, scalar


def test_scalar_feedback():
    system, weights = scalar()
    G = solve_coupled_care(system, weights)
    F = synthesize_feedback(G, system, weights)
    assert F.gain(0)[0, 0] == pytest.approx(SQRT2 - 1, abs=1e-10)
    assert F.control(0, 0, [1.0])[0] == pytest.approx(-0.41421, abs=1e-5)


def test_zero_gain_gives_zero_feedback():
    system, weights = coupled()
    F = synthesize_feedback(GainSet(np.zeros((2, 2, 2))), system, weights)
    assert not np.any(F.F)


def test_shape_mismatch_is_rejected():
    system, weights = coupled()
    with pytest.raises(ValueError):
        synthesize_feedback(GainSet(np.zeros((1, 1, 1))), system, weights)


def test_closed_loop_drift():
    system, weights = scalar()
    F = synthesize_feedback(solve_coupled_care(system, weights), system,
                            weights)
    cl = closed_loop(system, F)
    assert cl.A[0][0, 0] == pytest.approx(-SQRT2, abs=1e-10)
    assert not np.any(cl.B[0])
    assert closed_loop(system, None).A[0][0, 0] == -1.0


def test_closed_loop_of_zero_law_is_open_loop():
    system, weights = coupled()
    F = synthesize_feedback(GainSet(np.zeros((2, 2, 2))), system, weights)
    cl = closed_loop(system, F)
    assert all(np.array_equal(a, b) for a, b in zip(cl.A, system.A))


def test_lyapunov_value():
    G = solve_coupled_care(*scalar())
    assert lyapunov_value(G, 0, 0, [1.0]) == pytest.approx(SQRT2 - 1)
    assert lyapunov_value(G, 0, 0, [0.0]) == 0.0
    assert lyapunov_value(G, 0, 0, [2.0]) == pytest.approx(4 * (SQRT2 - 1))


def test_feedback_file_round_trip(tmp_path):
    system, weights = coupled()
    F = synthesize_feedback(solve_coupled_care(system, weights), system,
                            weights)
    save_feedback(tmp_path / "f.json", F)
    assert np.array_equal(load_feedback(tmp_path / "f.json").F, F.F)


def test_norm_squared_for_identity_gain():
    assert lyapunov_value(GainSet(np.eye(2)[None]), 0, 0, [3.0, 4.0]) == 25.0


def test_zero_input_matrix_gives_zero_feedback():
    system, weights = scalar(B=0.0)
    F = synthesize_feedback(GainSet([[[[0.7]]]]), system, weights)
    assert not np.any(F.F)


def test_eigenvalue_sandwich():
    G = solve_coupled_care(*coupled())
    lo, hi = G.eigen_bounds()
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((200, 2)):
        for i in range(2):
            v = lyapunov_value(G, i, 0, x)
            n2 = x @ x
            assert lo[i, 0] * n2 - 1e-12 <= v <= hi[i, 0] * n2 + 1e-12
