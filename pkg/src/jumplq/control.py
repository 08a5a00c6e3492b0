"""Feedback synthesis from value matrices and closed-loop construction."""

from __future__ import annotations

import json

import numpy as np

from .model import CostWeights, RegimeSystem
from .riccati import GainSet
from .simulate import FeedbackLaw


def synthesize_feedback(G: GainSet, system: RegimeSystem,
                        weights: CostWeights) -> FeedbackLaw:
    """Optimal gains ``F[i, k] = D[i, k]^{-1} B_i' G[i, k]``."""
    if G.N != system.N or G.G.shape[2:] != (system.m, system.m):
        raise ValueError(f"G shape {G.G.shape} does not match the system")
    K = max(G.n_intervals, weights.n_intervals)
    F = np.empty((system.N, K, system.r, system.m))
    for i in range(system.N):
        Bt = system.B[i].T
        for k in range(K):
            F[i, k] = np.linalg.solve(weights.D_at(i, k), Bt @ G.at(i, k))
    return FeedbackLaw(F)


def closed_loop(system: RegimeSystem, law: FeedbackLaw | None,
                k: int = 0) -> RegimeSystem:
    """System with ``A_i - B_i F[i, k]`` as drift and the input removed."""
    if law is None:
        A = list(system.A)
    else:
        A = [system.A[i] - system.B[i] @ law.gain(i, k)
             for i in range(system.N)]
    B = [np.zeros_like(b) for b in system.B]
    return system.replace(A=A, B=B)


def lyapunov_value(G: GainSet, i: int, k: int, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ G.at(i, k) @ x)


def save_feedback(path, law: FeedbackLaw, extra: dict | None = None) -> None:
    out = dict(extra or {})
    out["F"] = law.F.tolist()
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")


def load_feedback(path) -> FeedbackLaw:
    with open(path) as fh:
        return FeedbackLaw(np.array(json.load(fh)["F"], dtype=float))
