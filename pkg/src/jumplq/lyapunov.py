"""Statistical evidence of stability for a closed loop.

Every check here works from simulated paths: the one-interval change of the
quadratic Lyapunov function, the behaviour of its mean at the switch times,
a crude a-priori moment bound on each switch interval, and the probability
that a path started near the origin ever leaves a ball.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .model import DeterministicSwitchSpec, RegimeSystem
from .riccati import GainSet
from .simulate import (SimulationDivergence, _law_array, _path, common_grid,
                       map_paths)
from .stochastic import SeededStream


@dataclass(frozen=True)
class OperatorEstimate:
    estimate: float
    std_error: float
    n_samples: int


@dataclass(frozen=True)
class SupermartingaleReport:
    """Mean of ``v_k`` at ``t_0 = 0`` and at each switch time (after the jump)."""

    times: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    verdict: bool
    strictly_decreasing: bool

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "time", "mean_v", "std_error"])
            for k, (t, v, s) in enumerate(zip(self.times, self.mean,
                                              self.std_error)):
                w.writerow([k, repr(float(t)), repr(float(v)),
                            repr(float(s))])


@dataclass(frozen=True)
class BoundRow:
    k: int
    start: float
    end: float
    empirical_sup_second_moment: float
    bound: float

    @property
    def satisfied(self) -> bool:
        return self.empirical_sup_second_moment <= self.bound


@dataclass(frozen=True)
class StabilityRow:
    index: int
    regime: int
    x0: np.ndarray
    n_exceed: int
    n_paths: int
    upper: float

    @property
    def p_hat(self) -> float:
        return self.n_exceed / self.n_paths


@dataclass(frozen=True)
class StabilityEstimate:
    """Worst-case exceedance over the sampled initial states."""

    max_exceed_prob: float
    upper_bound: float
    eps1: float
    delta: float
    T: float
    rows: list

    def to_csv(self, path) -> None:
        m = self.rows[0].x0.size if self.rows else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x0_index", "regime"] + [f"x0_{a}" for a in range(m)]
                       + ["n_exceed", "n_paths", "p_hat", "wilson_upper"])
            for row in self.rows:
                w.writerow([row.index, row.regime]
                           + [repr(float(v)) for v in row.x0]
                           + [row.n_exceed, row.n_paths, repr(row.p_hat),
                              repr(row.upper)])


def _mean_se(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = math.fsum(values) / values.size
    var = math.fsum((values - mean) ** 2) / (values.size - 1)
    return mean, math.sqrt(var / values.size)


def _quad(G: GainSet, i: int, k: int, x) -> float:
    return float(x @ G.at(i, k) @ x)


def estimate_discrete_operator(system: RegimeSystem, law, G: GainSet, state,
                               k: int, n_samples: int, root_seed: int,
                               dt: float = 1e-3,
                               threads: int | None = 1) -> OperatorEstimate:
    """Monte Carlo estimate of ``E v_{k+1}(t_{k+1}) - v_k(y, h, x)``.

    The path starts at ``t_k`` in ``state = (y, h, x)`` and runs to
    ``t_{k+1}``, including the deterministic jump there.
    """
    y, h, x = state
    x = np.asarray(x, dtype=float).reshape(system.m)
    ds = system.det_switch
    if not 0 <= k < ds.times.size:
        raise ValueError(f"interval {k} has no closing switch time")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    t0 = 0.0 if k == 0 else float(ds.times[k - 1])
    gap = float(ds.times[k]) - t0
    shifted = system.replace(det_switch=DeterministicSwitchSpec(
        times=[gap], P_H=ds.P_H, h0=h, J=ds.J, min_gap=ds.min_gap))
    F = _law_array(law, system)
    # one interval only: the gains of interval k apply throughout
    F = F[:, min(k, F.shape[1] - 1):][:, :1]
    common = common_grid(gap, dt, shifted.det_switch.times)
    v0 = _quad(G, int(y), k, x)

    def one(p):
        path, bad = _path(shifted, F, x, int(y), gap, dt,
                          SeededStream(root_seed, p), common, h0=h)
        if bad >= 0:
            raise SimulationDivergence(float(path.grid[bad]) + t0, p)
        return _quad(G, int(path.regime[-1]), k + 1, path.x[-1])

    v1 = np.fromiter(map_paths(one, n_samples, threads), float, n_samples)
    mean, se = _mean_se(v1)
    return OperatorEstimate(mean - v0, se, n_samples)


def _switch_indices(path, times):
    return np.searchsorted(path.grid, times)


def supermartingale_check(paths, G: GainSet,
                          det_switch: DeterministicSwitchSpec
                          ) -> SupermartingaleReport:
    """Sample means of ``v_k`` at ``t_k`` and a non-increase verdict.

    The verdict holds when every step up is within two pooled standard
    errors; ``strictly_decreasing`` asks for every step to go down.
    """
    T = paths[0].T
    times = det_switch.times[(det_switch.times > 0)
                             & (det_switch.times <= T)]
    times = np.concatenate([[0.0], times])
    v = np.empty((len(paths), times.size))
    for p, path in enumerate(paths):
        idx = _switch_indices(path, times)
        for k, n in enumerate(idx):
            v[p, k] = _quad(G, int(path.regime[n]), k, path.x[n])
    stats_k = [_mean_se(v[:, k]) for k in range(times.size)]
    mean = np.array([s[0] for s in stats_k])
    se = np.array([s[1] for s in stats_k])
    steps = np.diff(mean)
    pooled = np.sqrt(se[:-1] ** 2 + se[1:] ** 2)
    verdict = bool(np.all(steps <= 2 * pooled))
    return SupermartingaleReport(times, mean, se, verdict,
                                 bool(np.all(steps < 0)))


def moment_bound(second_moment: float, L: float, gap: float,
                 C: float = 0.0) -> float:
    """A-priori bound on ``sup E|x|^2`` over an interval of length ``gap``."""
    try:
        growth = math.exp(7 * L * L * (gap + 8))
    except OverflowError:
        growth = math.inf
    base = 7 * (second_moment + 3 * C * C * gap)
    return 0.0 if base == 0 else base * growth


def moment_bound_check(paths, L: float, Delta: float | None = None,
                       C: float = 0.0) -> list:
    """Compare the empirical interval sup of ``E|x|^2`` with the bound.

    Intervals are split at the switch times on the paths' common grid; the
    last one closes at the horizon.  ``Delta`` overrides each interval's own
    length in the bound.
    """
    first = paths[0]
    common = first.grid[first.common_index]
    post = np.zeros(common.size)
    pre = np.zeros(common.size)
    for path in paths:
        ci = path.common_index
        post += np.einsum("na,na->n", path.x[ci], path.x[ci])
        pre += np.einsum("na,na->n", path.x_pre[ci], path.x_pre[ci])
    post /= len(paths)
    pre /= len(paths)
    switch = sorted({float(t) for path in paths for t, kind, _ in path.events
                     if kind == "det_switch"})
    edges = [0.0] + [t for t in switch if 0 < t < first.T] + [first.T]
    rows = []
    for k in range(len(edges) - 1):
        a, b = edges[k], edges[k + 1]
        ia = int(np.searchsorted(common, a))
        ib = int(np.searchsorted(common, b))
        emp = max(post[ia], float(np.max(pre[ia + 1:ib + 1], initial=0.0)),
                  float(np.max(post[ia:ib], initial=0.0)))
        gap = (b - a) if Delta is None else Delta
        rows.append(BoundRow(k, a, b, float(emp),
                             moment_bound(float(post[ia]), L, gap, C)))
    return rows


def _wilson_upper(k: int, n: int) -> float:
    ci = stats.binomtest(k, n).proportion_ci(0.95, method="wilson")
    return float(ci.high)


def stability_probability_estimate(system: RegimeSystem, law, eps1: float,
                                   delta: float, T: float, dt: float,
                                   n_paths: int, n_x0: int, root_seed: int,
                                   threads: int | None = 1
                                   ) -> StabilityEstimate:
    """Estimate ``P{sup_{t<=T} |x(t)| > eps1}`` for starts on ``|x0| = delta``.

    Initial states are uniform on the sphere and initial regimes uniform;
    path ``p`` of start ``j`` uses stream ``j * n_paths + p``.  A diverged
    path counts as an exceedance.
    """
    if not (eps1 > 0 and delta > 0):
        raise ValueError("eps1 and delta must be positive")
    F = _law_array(law, system)
    common = common_grid(T, dt, system.det_switch.times)
    rng = SeededStream(root_seed).child("x0").generator()
    rows = []
    for j in range(n_x0):
        z = rng.standard_normal(system.m)
        x0 = delta * z / np.linalg.norm(z)
        y0 = int(rng.integers(system.N))

        def one(p, x0=x0, y0=y0, j=j):
            path, bad = _path(system, F, x0, y0, T, dt,
                              SeededStream(root_seed, j * n_paths + p),
                              common)
            if bad >= 0:
                return True
            sup2 = max(np.max(np.einsum("na,na->n", path.x, path.x)),
                       np.max(np.einsum("na,na->n", path.x_pre, path.x_pre)))
            return bool(sup2 > eps1 * eps1)

        hits = sum(map_paths(one, n_paths, threads))
        rows.append(StabilityRow(j, y0, x0, int(hits), n_paths,
                                 _wilson_upper(int(hits), n_paths)))
    worst = max(rows, key=lambda r: (r.upper, r.n_exceed))
    return StabilityEstimate(max(r.p_hat for r in rows), worst.upper,
                             float(eps1), float(delta), float(T), rows)
