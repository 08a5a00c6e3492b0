import json
import subprocess
import sys

import numpy as np
import pytest

from jumplq.cli import main
from jumplq.model import save_model

from _models import coupled, noisy_scalar, scalar, two_scalar


@pytest.fixture
def scalar_model(tmp_path):
    path = tmp_path / "scalar.json"
    save_model(path, *scalar())
    return path


@pytest.fixture
def noisy_model(tmp_path):
    path = tmp_path / "noisy.json"
    save_model(path, *noisy_scalar())
    return path


def run(*args):
    return main([str(a) for a in args])


def gains(path):
    return np.array(json.loads(path.read_text())["G"])


def test_validate_exit_codes(scalar_model, tmp_path, capsys):
    assert run("validate", "--model", scalar_model) == 0
    assert "ok: True" in capsys.readouterr().out
    bad = tmp_path / "bad.json"
    save_model(bad, *two_scalar(Q=[[-1.0, 0.5], [1.0, -1.0]]))
    assert run("validate", "--model", bad) == 1
    assert "row 0" in capsys.readouterr().out
    assert run("validate", "--model", tmp_path / "missing.json") == 2
    assert "missing.json" in capsys.readouterr().err


def test_malformed_model_is_an_io_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("validate", "--model", bad) == 2
    assert "line 1" in capsys.readouterr().err


def test_synthesize_methods_agree(scalar_model, tmp_path, capsys):
    care = tmp_path / "care.json"
    assert run("synthesize", "--model", scalar_model, "--method", "care",
               "--out", care) == 0
    assert "positive definite: True" in capsys.readouterr().out
    assert gains(care)[0, 0, 0, 0] == pytest.approx(0.41421356, abs=1e-8)
    doc = json.loads(care.read_text())
    assert doc["meta"]["flags"]["method"] == "care"
    assert len(doc["meta"]["model_sha256"]) == 64

    ode = tmp_path / "ode.json"
    assert run("synthesize", "--model", scalar_model, "--method",
               "riccati-ode", "--horizon", 20, "--out", ode) == 0
    assert np.abs(gains(ode) - gains(care)).max() <= 1e-6

    p1 = tmp_path / "p1.json"
    assert run("synthesize", "--model", scalar_model, "--method", "perturb1",
               "--eps", 0, "--order", 2, "--out", p1) == 0
    assert np.array_equal(gains(p1), gains(care))
    series = json.loads((tmp_path / "p1.json.series.json").read_text())
    assert series["order"] == 2
    assert np.array_equal(np.array(series["coeffs"][0]), gains(care))


def test_perturb2_on_jump_model(tmp_path):
    model = tmp_path / "c.json"
    save_model(model, *coupled())
    out = tmp_path / "p2.json"
    assert run("synthesize", "--model", model, "--method", "perturb2",
               "--eps", 0.0, "--order", 1, "--out", out,
               "--series-out", tmp_path / "s.json") == 0
    assert (tmp_path / "s.json").exists()


def test_method_flags_are_required(scalar_model, tmp_path, capsys):
    out = tmp_path / "g.json"
    assert run("synthesize", "--model", scalar_model, "--method",
               "riccati-ode", "--out", out) == 2
    assert "--horizon" in capsys.readouterr().err


def test_randomized_commands_need_seed(scalar_model):
    with pytest.raises(SystemExit) as info:
        run("estimate-cost", "--model", scalar_model, "--x0", 1, "--T", 1,
            "--dt", 0.1, "--paths", 2)
    assert info.value.code == 2


def test_nonconvergence_exits_one(tmp_path, capsys):
    model = tmp_path / "u.json"
    save_model(model, *scalar(A=1.0, B=0.0))
    assert run("synthesize", "--model", model, "--method", "care", "--out",
               tmp_path / "g.json") == 1
    assert "error" in capsys.readouterr().err


def test_simulate_outputs(scalar_model, tmp_path):
    one = tmp_path / "one.csv"
    assert run("simulate", "--model", scalar_model, "--x0", 1, "--T", 1,
               "--dt", 0.1, "--seed", 3, "--out", one) == 0
    lines = one.read_text().splitlines()
    assert lines[0] == "time,x_0,regime,eta,u_0,event_kind"
    assert len(lines) == 12
    meta = json.loads((tmp_path / "one.csv.meta.json").read_text())["meta"]
    assert "threads" not in meta["flags"]

    many = tmp_path / "many.csv"
    assert run("simulate", "--model", scalar_model, "--x0", 1, "--T", 1,
               "--dt", 0.1, "--seed", 3, "--paths", 5, "--out", many) == 0
    assert len(many.read_text().splitlines()) == 6


def test_bad_x0_is_usage_error(scalar_model, tmp_path):
    assert run("simulate", "--model", scalar_model, "--x0", "1,2", "--T", 1,
               "--dt", 0.1, "--seed", 3, "--out", tmp_path / "x.csv") == 2


def test_divergence_exits_one(tmp_path):
    model = tmp_path / "u.json"
    save_model(model, *scalar(A=40.0))
    assert run("simulate", "--model", model, "--x0", 1, "--T", 10,
               "--dt", 0.01, "--seed", 0, "--out", tmp_path / "x.csv") == 1


def test_synthesize_then_estimate_reproduces_value(noisy_model, tmp_path):
    g = tmp_path / "g.json"
    run("synthesize", "--model", noisy_model, "--method", "care", "--out", g)
    out = tmp_path / "cost.json"
    assert run("estimate-cost", "--model", noisy_model, "--gains", g,
               "--x0", 1, "--T", 15, "--dt", 1e-3, "--paths", 4000,
               "--seed", 11, "--out", out) == 0
    doc = json.loads(out.read_text())
    est = doc["estimate"]
    assert abs(est["mean"] - doc["value_function"]) <= 2 * est["std_error"]


def test_compare_gains_and_determinism(noisy_model, tmp_path):
    g = tmp_path / "g.json"
    run("synthesize", "--model", noisy_model, "--method", "care", "--out", g)
    doc = json.loads(g.read_text())
    doc["G"] = (np.array(doc["G"]) + 0.3).tolist()
    g2 = tmp_path / "g2.json"
    g2.write_text(json.dumps(doc))
    outs = []
    for threads in (1, 3, 1):
        out = tmp_path / f"cmp{len(outs)}.json"
        assert run("estimate-cost", "--model", noisy_model, "--gains", g,
                   "--compare-gains", g2, "--x0", 1, "--T", 5, "--dt", 1e-2,
                   "--paths", 100, "--seed", 2, "--threads", threads,
                   "--out", out) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    cmp = json.loads(outs[0])["comparison"]
    assert cmp["diff"] > 0 and cmp["ci95"][0] > 0


def test_check_stability(scalar_model, tmp_path, capsys):
    g = tmp_path / "g.json"
    run("synthesize", "--model", scalar_model, "--method", "care", "--out", g)
    out = tmp_path / "s.csv"
    assert run("check-stability", "--model", scalar_model, "--gains", g,
               "--eps1", 1, "--delta", 0.01, "--T", 5, "--dt", 0.01,
               "--paths", 50, "--x0-samples", 2, "--seed", 1,
               "--out", out) == 0
    assert len(out.read_text().splitlines()) == 3
    summary = json.loads((tmp_path / "s.csv.meta.json").read_text())
    assert summary["max_exceed_prob"] == 0.0
    assert run("check-stability", "--model", scalar_model, "--eps1", 1,
               "--delta", 0.01, "--T", 1, "--dt", 0.1, "--paths", 5,
               "--seed", 1) == 0
    assert "upper_bound_95" in capsys.readouterr().out


def test_console_script_entry(scalar_model):
    proc = subprocess.run([sys.executable, "-m", "jumplq.cli", "validate",
                           "--model", str(scalar_model)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("ok: True")
