"""Monte Carlo estimation of the quadratic cost of a feedback law.

The cost of a path is the trapezoidal integral over ``[0, T]`` of
``W = x'M x + u'D u``; on each step the right end uses the left limit of the
state, so jumps do not leak into the step before them.  Paths use the stream
contract of :mod:`jumplq.simulate`, so two laws evaluated with the same seed
see the same noise (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy import stats

from .model import CostWeights, RegimeSystem
from .simulate import FeedbackLaw, _law_array, _path, common_grid, map_paths
from .stochastic import SeededStream

MAX_DIVERGED_FRACTION = 0.01


class CostAggregationError(RuntimeError):
    def __init__(self, n_diverged: int, n_paths: int, first: int):
        self.n_diverged = n_diverged
        self.n_paths = n_paths
        super().__init__(f"{n_diverged} of {n_paths} paths diverged "
                         f"(first: path {first}); refusing to aggregate")


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    n_paths: int
    T: float
    dt: float
    tail_estimate: float
    n_diverged: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CostComparison:
    """Paired comparison of two laws on common random numbers.

    ``diff`` is ``cost(other) - cost(reference)`` averaged over paths.
    """

    reference: CostEstimate
    other: CostEstimate
    diff: float
    diff_std_error: float

    def ci95(self) -> tuple[float, float]:
        z = stats.norm.ppf(0.975)
        return (self.diff - z * self.diff_std_error,
                self.diff + z * self.diff_std_error)

    def to_dict(self) -> dict:
        lo, hi = self.ci95()
        return {"reference": self.reference.to_dict(),
                "other": self.other.to_dict(), "diff": self.diff,
                "diff_std_error": self.diff_std_error, "ci95": [lo, hi]}


def running_cost(weights: CostWeights, i: int, k: int, x, u) -> float:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return float(x @ weights.M_at(i, k) @ x + u @ weights.D_at(i, k) @ u)


def _weight_stack(system, weights, n_k):
    M = np.array([[weights.M_at(i, k) for k in range(n_k)]
                  for i in range(system.N)], dtype=float)
    D = np.array([[weights.D_at(i, k) for k in range(n_k)]
                  for i in range(system.N)], dtype=float)
    return M, D


@njit(cache=True, nogil=True)
def _trapezoid(grid, x, x_pre, u, regime, kidx, F, M, D, W):
    n_pts, m = x.shape
    r = u.shape[1]
    nk = M.shape[1]
    nf = F.shape[1]
    ur = np.empty(r)
    total = 0.0
    comp = 0.0
    for n in range(n_pts):
        i = regime[n]
        k = min(kidx[n], nk - 1)
        s = 0.0
        for a in range(m):
            for b in range(m):
                s += x[n, a] * M[i, k, a, b] * x[n, b]
        for a in range(r):
            for b in range(r):
                s += u[n, a] * D[i, k, a, b] * u[n, b]
        W[n] = s
        if n == 0:
            continue
        # right end of step n-1: left limit, regime of the step
        i0 = regime[n - 1]
        k0 = min(kidx[n - 1], nk - 1)
        f0 = min(kidx[n - 1], nf - 1)
        wr = 0.0
        for a in range(m):
            for b in range(m):
                wr += x_pre[n, a] * M[i0, k0, a, b] * x_pre[n, b]
        for a in range(r):
            t = 0.0
            for b in range(m):
                t -= F[i0, f0, a, b] * x_pre[n, b]
            ur[a] = t
        for a in range(r):
            for b in range(r):
                wr += ur[a] * D[i0, k0, a, b] * ur[b]
        term = 0.5 * (grid[n] - grid[n - 1]) * (W[n - 1] + wr)
        # Neumaier compensated sum
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
    return total + comp


def path_running_cost(path, F, M, D):
    """Running cost at each grid point (after jumps) and the path integral."""
    W = np.empty(path.grid.size)
    total = _trapezoid(path.grid, path.x, path.x_pre, path.u, path.regime,
                       path.k, F, M, D, W)
    return W, float(total)


def _costs(system, weights, law, x0, y0, T, dt, n_paths, root_seed, threads):
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    F = _law_array(law, system)
    n_k = max(weights.n_intervals, F.shape[1])
    M, D = _weight_stack(system, weights, n_k)
    common = common_grid(T, dt, system.det_switch.times)

    def one(p):
        path, bad = _path(system, F, x0, y0, T, dt,
                          SeededStream(root_seed, p), common)
        if bad >= 0:
            return math.nan, None
        W, c = path_running_cost(path, F, M, D)
        return c, W[path.common_index]

    costs = np.empty(n_paths)
    W_sum = np.zeros(common.size)
    for p, (c, Wc) in enumerate(map_paths(one, n_paths, threads)):
        costs[p] = c
        if Wc is not None:
            W_sum += Wc
    return costs, W_sum, common


def _tail(W_mean, common, T):
    if W_mean[-1] <= 0:
        return 0.0
    a = int(np.searchsorted(common, 0.9 * T))
    a = min(a, common.size - 2)
    span = T - common[a]
    if W_mean[a] <= 0 or span <= 0:
        return math.inf
    rate = math.log(W_mean[a] / W_mean[-1]) / span
    return float(W_mean[-1] / rate) if rate > 0 else math.inf


def _estimate(costs, W_sum, common, T, dt):
    ok = np.isfinite(costs)
    n_bad = int(np.count_nonzero(~ok))
    n = costs.size
    if n_bad > MAX_DIVERGED_FRACTION * n:
        raise CostAggregationError(n_bad, n, int(np.argmin(ok)))
    good = costs[ok]
    mean = math.fsum(good) / good.size
    var = math.fsum((good - mean) ** 2) / (good.size - 1)
    tail = _tail(W_sum / good.size, common, T)
    return CostEstimate(mean, math.sqrt(var / good.size), int(good.size),
                        float(T), float(dt), tail, n_bad)


def estimate_cost(system: RegimeSystem, weights: CostWeights,
                  law: FeedbackLaw | None, x0, y0: int, T: float, dt: float,
                  n_paths: int, root_seed: int,
                  threads: int | None = 1) -> CostEstimate:
    """Mean cost over ``n_paths`` simulated paths with its standard error.

    Paths that diverge are excluded and counted; more than 1% divergent
    paths raises :class:`CostAggregationError`.
    """
    costs, W_sum, common = _costs(system, weights, law, x0, y0, T, dt,
                                  n_paths, root_seed, threads)
    return _estimate(costs, W_sum, common, T, dt)


def compare_costs(system: RegimeSystem, weights: CostWeights,
                  reference: FeedbackLaw | None, other: FeedbackLaw | None,
                  x0, y0: int, T: float, dt: float, n_paths: int,
                  root_seed: int, threads: int | None = 1) -> CostComparison:
    """Evaluate two laws on the same noise and report the paired difference."""
    ca, Wa, common = _costs(system, weights, reference, x0, y0, T, dt,
                            n_paths, root_seed, threads)
    cb, Wb, _ = _costs(system, weights, other, x0, y0, T, dt, n_paths,
                       root_seed, threads)
    ea = _estimate(ca, Wa, common, T, dt)
    eb = _estimate(cb, Wb, common, T, dt)
    ok = np.isfinite(ca) & np.isfinite(cb)
    d = cb[ok] - ca[ok]
    mean = math.fsum(d) / d.size
    var = math.fsum((d - mean) ** 2) / (d.size - 1)
    return CostComparison(ea, eb, mean, math.sqrt(var / d.size))

