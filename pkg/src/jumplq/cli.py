"""Command-line entry point: ``jumplq <command> ...``.

Exit status is 0 on success, 1 when a solver or simulation fails
numerically, and 2 for unreadable input or bad usage.  Every randomized
command needs an explicit ``--seed``; output files carry a ``meta`` block
(JSON) or a ``.meta.json`` sidecar (CSV) recording the tool version, the
flags and the SHA-256 of the model file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from importlib import metadata

import numpy as np

from .control import synthesize_feedback
from .cost import CostAggregationError, compare_costs, estimate_cost
from .lyapunov import stability_probability_estimate
from .model import ModelFormatError, RegimeJumpSpec, load_model, validate
from .perturb import (PerturbationError, assemble_series, solve_case1,
                      solve_case2)
from .riccati import (GainSet, IndefiniteIterate, NonConvergence,
                      RiccatiDivergence, SolveOptions, care_residual,
                      solve_coupled_care, solve_riccati_ode)
from .simulate import (SimulationDivergence, batch_summary_csv, simulate_batch,
                       simulate_path)
from .stochastic import SeededStream

EXIT_OK, EXIT_NUMERIC, EXIT_IO = 0, 1, 2


class InputError(Exception):
    """Unreadable or inconsistent input; maps to exit status 2."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _threads_default() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _meta(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("threads", "func", "out", "series_out")}
    with open(args.model, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    return {"tool": "jumplq", "version": _version(), "flags": flags,
            "model_sha256": digest}


def _write_json(obj: dict, out) -> None:
    text = json.dumps(obj, indent=1) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _write_meta_sidecar(args, out) -> None:
    _write_json({"meta": _meta(args)}, f"{out}.meta.json")


def _load(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise InputError(f"cannot read model {path}: {exc.strerror}") from exc
    except ModelFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_gains(path) -> GainSet:
    try:
        return GainSet.load(path)
    except OSError as exc:
        raise InputError(f"cannot read gains {path}: {exc.strerror}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed gain file ({exc})") from exc


def _law(system, weights, gains_path):
    if gains_path is None:
        return None
    G = _load_gains(gains_path)
    try:
        return synthesize_feedback(G, system, weights)
    except ValueError as exc:
        raise InputError(f"{gains_path}: {exc}") from exc


def _vector(text: str, m: int, name: str) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError as exc:
        raise InputError(f"--{name} must be comma-separated numbers") from exc
    if v.size != m:
        raise InputError(f"--{name} has {v.size} entries, model has m = {m}")
    return v


def _report(system, weights, G: GainSet) -> None:
    res = np.linalg.norm(care_residual(system, weights, G), axis=(2, 3))
    for i in range(G.N):
        for k in range(G.n_intervals):
            pd = bool(G.positive_definite()[i, k])
            print(f"G[{i}][{k}]: residual {res[i, min(k, res.shape[1] - 1)]:.3e}"
                  f"  positive definite: {pd}")


# ---------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    system, weights = _load(args.model)
    report = validate(system, weights)
    print(report)
    return EXIT_OK if report.ok else EXIT_NUMERIC


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise InputError(f"method {args.method} needs {flags}")


def cmd_synthesize(args) -> int:
    system, weights = _load(args.model)
    opts = SolveOptions(tol=args.tol)
    series = None
    if args.method == "care":
        G = solve_coupled_care(system, weights, opts)
        target = system
    elif args.method == "riccati-ode":
        _need(args, "horizon")
        traj = solve_riccati_ode(system, weights, args.horizon, args.dt_g)
        G = traj.initial()
        target = system
        if not traj.psd:
            print("warning: Riccati trajectory left the PSD cone",
                  file=sys.stderr)
    elif args.method == "perturb1":
        # the model's generator gives the directions r_ij; Q = eps * r_ij
        _need(args, "eps", "order")
        target = system.replace(Q=args.eps * system.Q)
        series = solve_case1(target, weights, system.Q, args.eps, args.order,
                             opts)
        G = assemble_series(series)
    else:
        # the model's jump maps give the directions: K = I + eps (K_model - I)
        _need(args, "eps", "order")
        eye = np.eye(system.m)
        K_hat = np.array([[k - eye for k in row]
                          for row in system.regime_jump.K])
        Q_hat = np.array(system.regime_jump.Qs).reshape(-1, system.m,
                                                        system.m)
        rj = system.regime_jump
        target = system.replace(regime_jump=RegimeJumpSpec(
            K=eye + args.eps * K_hat, Qs=tuple(args.eps * Q_hat),
            xi_law=rj.xi_law))
        series = solve_case2(target, weights, K_hat, Q_hat, args.eps,
                             args.order, opts)
        G = assemble_series(series)
    _report(target, weights, G)
    meta = {"meta": _meta(args), "method": args.method}
    G.save(args.out, meta)
    if series is not None:
        out = args.series_out or f"{args.out}.series.json"
        _write_json({**meta, **series.to_dict()}, out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    system, weights = _load(args.model)
    law = _law(system, weights, args.gains)
    x0 = _vector(args.x0, system.m, "x0")
    if args.paths == 1:
        path = simulate_path(system, law, x0, args.y0, args.T, args.dt,
                             SeededStream(args.seed))
        path.to_csv(args.out)
    else:
        paths = simulate_batch(system, law, x0, args.y0, args.T, args.dt,
                               args.paths, args.seed, args.threads)
        batch_summary_csv(paths, args.out)
    _write_meta_sidecar(args, args.out)
    return EXIT_OK


def cmd_estimate_cost(args) -> int:
    system, weights = _load(args.model)
    law = _law(system, weights, args.gains)
    x0 = _vector(args.x0, system.m, "x0")
    common = (system, weights)
    if args.compare_gains is None:
        est = estimate_cost(*common, law, x0, args.y0, args.T, args.dt,
                            args.paths, args.seed, args.threads)
        body = {"estimate": est.to_dict()}
        if args.gains is not None:
            v0 = float(x0 @ _load_gains(args.gains).at(args.y0, 0) @ x0)
            body["value_function"] = v0
    else:
        other = _law(system, weights, args.compare_gains)
        cmp = compare_costs(*common, law, other, x0, args.y0, args.T,
                            args.dt, args.paths, args.seed, args.threads)
        body = {"comparison": cmp.to_dict()}
    _write_json({"meta": _meta(args), **body}, args.out)
    return EXIT_OK


def cmd_check_stability(args) -> int:
    system, weights = _load(args.model)
    law = _law(system, weights, args.gains)
    est = stability_probability_estimate(
        system, law, args.eps1, args.delta, args.T, args.dt, args.paths,
        args.x0_samples, args.seed, args.threads)
    summary = {"meta": _meta(args), "max_exceed_prob": est.max_exceed_prob,
               "upper_bound_95": est.upper_bound}
    if args.out is None:
        _write_json(summary, None)
    else:
        est.to_csv(args.out)
        _write_json(summary, f"{args.out}.meta.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="jumplq",
        description="Optimal feedback and stability checks for linear "
                    "regime-switching jump diffusions.")
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--model", required=True, help="model JSON file")
        sp.set_defaults(func=func)
        return sp

    def randomized(sp, out_required=False, paths=None):
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--threads", type=int, default=_threads_default(),
                        help="worker threads (results do not depend on it)")
        sp.add_argument("--T", type=float, required=True, help="horizon")
        sp.add_argument("--dt", type=float, required=True)
        sp.add_argument("--paths", type=int, required=paths is None,
                        default=paths)
        sp.add_argument("--gains", help="GainSet JSON; omit for zero control")
        sp.add_argument("--out", required=out_required)

    command("validate", cmd_validate, "check a model file")

    sp = command("synthesize", cmd_synthesize, "compute value matrices")
    sp.add_argument("--method", required=True,
                    choices=["care", "riccati-ode", "perturb1", "perturb2"])
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--dt-g", type=float, default=1e-2,
                    help="RK4 step for riccati-ode")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--order", type=int)
    sp.add_argument("--out", required=True)
    sp.add_argument("--series-out",
                    help="series coefficients (default: OUT.series.json)")

    sp = command("simulate", cmd_simulate, "simulate closed-loop paths")
    randomized(sp, out_required=True, paths=1)
    sp.add_argument("--x0", required=True, help="comma-separated state")
    sp.add_argument("--y0", type=int, default=0)

    sp = command("estimate-cost", cmd_estimate_cost,
                 "Monte Carlo cost of a feedback law")
    randomized(sp)
    sp.add_argument("--x0", required=True, help="comma-separated state")
    sp.add_argument("--y0", type=int, default=0)
    sp.add_argument("--compare-gains",
                    help="second GainSet, compared on common random numbers")

    sp = command("check-stability", cmd_check_stability,
                 "exceedance probability from small initial states")
    randomized(sp)
    sp.add_argument("--eps1", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--x0-samples", type=int, default=8)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonConvergence as exc:
        print(f"error: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_NUMERIC
    except (IndefiniteIterate, RiccatiDivergence, SimulationDivergence,
            PerturbationError, CostAggregationError,
            np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
