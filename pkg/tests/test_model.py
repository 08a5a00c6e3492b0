import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumplq.model import (CostWeights, DeterministicSwitchSpec,
                          ModelDimensionError, ModelFormatError, RegimeSystem,
                          load_model, model_from_dict, model_to_dict,
                          permute_regimes, save_model, validate)

from _models import coupled, scalar, two_scalar


def test_scalar_model_is_valid_with_unit_lipschitz():
    report = validate(*scalar())
    assert report.ok
    assert report.lipschitz == pytest.approx(1.0)
    assert report.max_gap == np.inf
    assert report.growth_bound == 0.0


def test_symmetric_generator_passes():
    system, weights = two_scalar(Q=[[-1.0, 1.0], [1.0, -1.0]])
    assert validate(system, weights).ok


def test_generator_row_sum_violation_names_row():
    system, weights = two_scalar(Q=[[-1.0, 0.5], [1.0, -1.0]])
    report = validate(system, weights)
    assert not report.ok
    assert any("row 0 sums to -0.5" in v for v in report.violations)


def test_negative_off_diagonal_rate_is_reported():
    system, weights = two_scalar(Q=[[1.0, -1.0], [1.0, -1.0]])
    assert not validate(system, weights).ok


def test_singular_D_is_reported():
    system, _ = scalar()
    weights = CostWeights.create(M=[[[1.0]]], D=[[[0.0]]])
    report = validate(system, weights)
    assert any("D not positive definite" in v for v in report.violations)


def test_asymmetric_or_indefinite_M_is_reported():
    system, _ = coupled()
    bad = CostWeights.create(M=[np.array([[1.0, 2.0], [0.0, 1.0]]),
                                -np.eye(2)], D=[[[1.0]]] * 2)
    assert len(validate(system, bad).violations) >= 2


def test_regime_jump_diagonal_must_be_identity():
    system, weights = two_scalar(K=[[[[2.0]], [[1.0]]], [[[1.0]], [[1.0]]]])
    report = validate(system, weights)
    assert any("K[0][0]" in v for v in report.violations)


def test_negative_mark_weight_is_reported():
    system = RegimeSystem.create(A=[[[-1.0]]], B=[[[1.0]]],
                                 poisson=[[(-0.5, [[0.1]])]])
    report = validate(system, scalar()[1])
    assert not report.ok


def test_switch_gaps_and_eta_chain_checked():
    ds = DeterministicSwitchSpec(times=[1.0, 1.5, 4.0], P_H=[[0.5, 0.5],
                                                             [0.0, 1.0]],
                                 h0=0, J=[np.eye(1), 2 * np.eye(1)],
                                 min_gap=0.1, max_gap=3.0)
    system, weights = scalar(det_switch=ds)
    report = validate(system, weights)
    assert report.ok
    assert report.max_gap == pytest.approx(2.5)
    # L picks up the largest jump increment |J_h - I|
    assert report.lipschitz == pytest.approx(2.0)

    tight = DeterministicSwitchSpec(times=[1.0, 1.05], P_H=[[0.7, 0.2]],
                                    h0=0, J=[np.eye(1)], min_gap=0.1)
    report = validate(scalar(det_switch=tight)[0], weights)
    assert len(report.violations) >= 2


def test_report_text_lists_constants():
    text = str(validate(*scalar()))
    assert text.startswith("ok: True")
    assert "L: 1" in text


def test_round_trip_is_bit_exact(tmp_path):
    system, weights = coupled()
    path = tmp_path / "model.json"
    save_model(path, system, weights)
    s2, w2 = load_model(path)
    assert model_to_dict(s2, w2) == model_to_dict(system, weights)
    assert str(validate(s2, w2)) == str(validate(system, weights))


def test_minimal_file_gives_scalar_system(tmp_path):
    doc = {"m": 1, "r": 1, "N": 1,
           "regimes": [{"A": [[-1.0]], "B": [[1.0]]}],
           "Q": [[0.0]], "weights": {"M": [[[1.0]]], "D": [[[1.0]]]}}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    system, weights = load_model(path)
    assert system.det_switch.times.size == 0
    assert model_to_dict(system, weights) == model_to_dict(*scalar())


def test_wrong_shape_names_field():
    doc = model_to_dict(*scalar())
    doc["regimes"][0]["A"] = [[1.0, 2.0]]
    with pytest.raises(ModelDimensionError, match=r"A\[0\]"):
        model_from_dict(doc)


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"m": 1,\n "r": }')
    with pytest.raises(ModelFormatError, match="line 2"):
        load_model(path)


def test_missing_field_is_a_format_error():
    doc = model_to_dict(*scalar())
    del doc["weights"]
    with pytest.raises(ModelFormatError, match="weights"):
        model_from_dict(doc)


def test_types_are_immutable():
    system, weights = coupled()
    with pytest.raises(ValueError):
        system.A[0][0, 0] = 5.0
    with pytest.raises(AttributeError):
        system.m = 3


def test_per_interval_weights_clip_to_last():
    weights = CostWeights.create(M=[[np.eye(1), 2 * np.eye(1)]], D=[[[1.0]]])
    assert weights.n_intervals == 2
    assert weights.M_at(0, 7)[0, 0] == 2.0
    assert weights.D_at(0, 3)[0, 0] == 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(-2, 2),
       st.floats(-2, 2))
def test_lipschitz_invariant_under_regime_permutation(q01, q10, a0, a1):
    Q = np.array([[-q01, q01], [q10, -q10]])
    system = RegimeSystem.create(A=[[[a0]], [[a1]]], B=[[[1.0]], [[0.5]]],
                                 Q=Q, Sigma=[[[[0.3]]], [[[0.1]]]],
                                 K=[[[[1.0]], [[1.2]]], [[[0.8]], [[1.0]]]])
    weights = CostWeights.create(M=[[[1.0]], [[2.0]]], D=[[[1.0]], [[3.0]]])
    before = validate(system, weights)
    after = validate(*permute_regimes(system, weights, [1, 0]))
    assert before.ok and after.ok
    assert after.lipschitz == pytest.approx(before.lipschitz, rel=1e-14)
