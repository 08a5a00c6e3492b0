"""Euler-Maruyama simulation of the controlled regime-switching system.

All randomness that does not depend on the state (regime path, switch-chain
path, jump coefficients, Wiener increments, Poisson counts) is drawn before
integration, each from its own sub-stream.  The time grid is the uniform grid
of step ``dt`` merged with every regime-jump and deterministic-switch time, so
jumps happen exactly when they should.  The state recursion itself runs in a
compiled kernel.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from numba import njit

from .model import RegimeSystem
from .stochastic import SeededStream, sample_ctmc, sample_xi, step_eta

EXPLOSION_THRESHOLD = 1e12


class SimulationDivergence(ArithmeticError):
    """State became non-finite or exceeded the explosion threshold."""

    def __init__(self, time: float, path_index: int | None = None):
        self.time = time
        self.path_index = path_index
        where = "" if path_index is None else f" (path {path_index})"
        super().__init__(f"state diverged at t = {time:.6g}{where}")


@dataclass(frozen=True)
class FeedbackLaw:
    """Linear state feedback ``u = -F[i, k] x``.

    ``F`` has shape ``(N, K, r, m)``; the interval index ``k`` is clipped to
    the last available entry.
    """

    F: np.ndarray

    def __post_init__(self):
        F = np.array(self.F, dtype=float)
        if F.ndim != 4:
            raise ValueError("F must have shape (N, K, r, m)")
        if not np.all(np.isfinite(F)):
            raise ValueError("feedback gains must be finite")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)

    @classmethod
    def zero(cls, system: RegimeSystem, n_intervals: int = 1) -> "FeedbackLaw":
        return cls(np.zeros((system.N, n_intervals, system.r, system.m)))

    def gain(self, i: int, k: int = 0) -> np.ndarray:
        return self.F[i, min(k, self.F.shape[1] - 1)]

    def control(self, i: int, k: int, x) -> np.ndarray:
        return -self.gain(i, k) @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class TrajectoryPath:
    """One simulated path.

    ``x[n]`` is the state at ``grid[n]`` after any jump there and
    ``x_pre[n]`` the left limit.  ``u[n]`` is the control applied on
    ``[grid[n], grid[n+1])`` (the last entry is the feedback at the final
    state).  ``k[n]`` is the switch-interval index in force at ``grid[n]``
    and ``common_index`` locates the uniform grid and switch times, which
    every path of a batch shares.
    """

    grid: np.ndarray
    x: np.ndarray
    x_pre: np.ndarray
    regime: np.ndarray
    eta: np.ndarray
    k: np.ndarray
    u: np.ndarray
    events: list
    common_index: np.ndarray

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def event_kind(self) -> list:
        kinds = [""] * len(self.grid)
        for t, kind, _ in self.events:
            n = int(np.searchsorted(self.grid, t))
            kinds[n] = kind if not kinds[n] else kinds[n] + "+" + kind
        return kinds

    def to_csv(self, path) -> None:
        m, r = self.x.shape[1], self.u.shape[1]
        kinds = self.event_kind()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time"] + [f"x_{i}" for i in range(m)]
                       + ["regime", "eta"] + [f"u_{i}" for i in range(r)]
                       + ["event_kind"])
            for n in range(len(self.grid)):
                w.writerow([repr(float(self.grid[n]))]
                           + [repr(float(v)) for v in self.x[n]]
                           + [int(self.regime[n]), int(self.eta[n])]
                           + [repr(float(v)) for v in self.u[n]]
                           + [kinds[n]])


@njit(cache=True, nogil=True)
def _integrate(grid, x0, regime, kidx, A, B, Sig, pi, C, F, dW, counts,
               jump_idx, jump_mats, x, x_pre, u, threshold):
    n_pts = grid.shape[0]
    m = x0.shape[0]
    r = B.shape[2]
    d = Sig.shape[1]
    nj = C.shape[1]
    nk = F.shape[1]
    for a in range(m):
        x[0, a] = x0[a]
        x_pre[0, a] = x0[a]
    cur = np.empty(m)
    nxt = np.empty(m)
    z = np.empty(m)
    tmp = np.empty(m)
    ui = np.empty(r)
    for n in range(n_pts):
        i = regime[n]
        k = min(kidx[n], nk - 1)
        for a in range(m):
            cur[a] = x[n, a]
        for b in range(r):
            s = 0.0
            for a in range(m):
                s -= F[i, k, b, a] * cur[a]
            ui[b] = s
            u[n, b] = s
        if n == n_pts - 1:
            break
        h = grid[n + 1] - grid[n]
        sq = math.sqrt(h)
        for a in range(m):
            s = 0.0
            for c in range(m):
                s += A[i, a, c] * cur[c]
            for b in range(r):
                s += B[i, a, b] * ui[b]
            nxt[a] = cur[a] + s * h
        for l in range(d):
            w = dW[n, l] * sq
            for a in range(m):
                s = 0.0
                for c in range(m):
                    s += Sig[i, l, a, c] * cur[c]
                nxt[a] += s * w
        for j in range(nj):
            lam = pi[i, j] * h
            for a in range(m):
                s = 0.0
                for c in range(m):
                    s += C[i, j, a, c] * cur[c]
                nxt[a] -= s * lam
        for a in range(m):
            x_pre[n + 1, a] = nxt[a]
        jumped = False
        for j in range(nj):
            if counts[n, j] > 0:
                jumped = True
        if jumped:
            for a in range(m):
                z[a] = cur[a]
            for j in range(nj):
                for _ in range(counts[n, j]):
                    for a in range(m):
                        s = 0.0
                        for c in range(m):
                            s += C[i, j, a, c] * z[c]
                        tmp[a] = z[a] + s
                    for a in range(m):
                        z[a] = tmp[a]
            for a in range(m):
                nxt[a] += z[a] - cur[a]
        for e in range(jump_idx.shape[1]):
            q = jump_idx[n + 1, e]
            if q >= 0:
                for a in range(m):
                    s = 0.0
                    for c in range(m):
                        s += jump_mats[q, a, c] * nxt[c]
                    tmp[a] = s
                for a in range(m):
                    nxt[a] = tmp[a]
        bad = False
        for a in range(m):
            x[n + 1, a] = nxt[a]
            if not (abs(nxt[a]) <= threshold):
                bad = True
        if bad:
            return n + 1
    return -1


def common_grid(T: float, dt: float, switch_times) -> np.ndarray:
    """Uniform grid of step ``dt`` on ``[0, T]`` merged with switch times."""
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    base = np.arange(n + 1, dtype=float) * dt
    base[-1] = T
    times = np.asarray(switch_times, dtype=float)
    times = times[(times > 0) & (times <= T)]
    if times.size:
        near = np.min(np.abs(base[:, None] - times[None, :]), axis=1)
        base = base[near > 1e-9 * dt]
    return np.union1d(base, times)


def _law_array(law, system) -> np.ndarray:
    if law is None:
        return np.zeros((system.N, 1, system.r, system.m))
    F = law.F if isinstance(law, FeedbackLaw) else np.asarray(law, float)
    if F.shape[0] != system.N or F.shape[2:] != (system.r, system.m):
        raise ValueError(f"feedback shape {F.shape} does not match system")
    return np.ascontiguousarray(F)


def _path(system: RegimeSystem, F: np.ndarray, x0, y0: int, T: float,
          dt: float, stream: SeededStream, common: np.ndarray,
          h0: int | None = None, k0: int = 0):
    """Simulate one path; returns ``(TrajectoryPath, diverged_index)``."""
    P = system.packed
    ds = system.det_switch
    x0 = np.asarray(x0, dtype=float).reshape(system.m)
    rpath = sample_ctmc(P.Q, int(y0), T, stream.child("ctmc"))
    tau = rpath.times
    if tau.size:
        grid = np.union1d(common, tau)
        # position of each common point in the merged grid
        common_index = (np.arange(common.size)
                        + np.searchsorted(np.setdiff1d(tau, common), common))
        regime = rpath.states[np.searchsorted(tau, grid, side="right")]
    else:
        grid = common
        common_index = np.arange(common.size)
        regime = np.full(grid.size, rpath.states[0], dtype=np.int64)
    n_pts = grid.size
    n = n_pts - 1

    switch_times = ds.times[(ds.times > 0) & (ds.times <= T)]
    n_sw = np.searchsorted(switch_times, grid, side="right")
    kidx = (n_sw + k0).astype(np.int64)

    # jump matrices: regime transition first, then the deterministic switch
    jump_idx = -np.ones((n_pts, 2), dtype=np.int64)
    mats = []
    events = []
    if tau.size:
        xi_rng = stream.child("xi").generator()
        S = P.Qs.shape[0]
        pos = np.searchsorted(grid, tau)
        for e, t in enumerate(tau):
            i, j = int(rpath.states[e]), int(rpath.states[e + 1])
            Mj = P.K[i, j].copy()
            if S:
                xi = sample_xi(system.regime_jump.xi_law, S, xi_rng)
                Mj = Mj + np.einsum("s,sab->ab", xi, P.Qs)
            jump_idx[pos[e], 0] = len(mats)
            mats.append(Mj)
            events.append((float(t), "regime_jump", (i, j)))
    eta = np.full(n_pts, ds.h0 if h0 is None else int(h0), dtype=np.int64)
    if switch_times.size:
        eta_rng = stream.child("eta").generator()
        pos = np.searchsorted(grid, switch_times)
        h = int(eta[0])
        for e, t in enumerate(switch_times):
            h = step_eta(ds.P_H, h, eta_rng)
            eta[pos[e]:] = h
            jump_idx[pos[e], 1] = len(mats)
            mats.append(P.Jh[h])
            events.append((float(t), "det_switch", h))
    jump_mats = (np.array(mats, dtype=float) if mats
                 else np.zeros((1, system.m, system.m)))

    steps = np.diff(grid)
    d = P.Sig.shape[1]
    nj = P.pi.shape[1]
    dW = stream.child("wiener").generator().standard_normal((n, d))
    if nj:
        lam = P.pi[regime[:-1]] * steps[:, None]
        counts = stream.child("poisson").generator().poisson(lam)
        counts = counts.astype(np.int64)
    else:
        counts = np.zeros((n, 0), dtype=np.int64)

    x = np.zeros((n_pts, system.m))
    x_pre = np.zeros((n_pts, system.m))
    u = np.zeros((n_pts, system.r))
    bad = _integrate(grid, x0, regime, kidx, P.A, P.B, P.Sig, P.pi, P.C, F,
                     dW, counts, jump_idx, jump_mats, x, x_pre, u,
                     EXPLOSION_THRESHOLD)
    if nj:
        for n_step, j in zip(*np.nonzero(counts)):
            events.append((float(grid[n_step + 1]), "poisson",
                           (int(j), int(counts[n_step, j]))))
    events.sort(key=lambda ev: ev[0])
    path = TrajectoryPath(grid=grid, x=x, x_pre=x_pre, regime=regime,
                          eta=eta, k=kidx, u=u, events=events,
                          common_index=common_index)
    return path, int(bad)


def simulate_path(system: RegimeSystem, law: FeedbackLaw | None, x0, y0: int,
                  T: float, dt: float, stream: SeededStream,
                  h0: int | None = None, k0: int = 0) -> TrajectoryPath:
    """Simulate one closed-loop path (``law=None`` means zero control).

    Raises :class:`SimulationDivergence` if the state blows up.
    """
    F = _law_array(law, system)
    common = common_grid(T, dt, system.det_switch.times)
    path, bad = _path(system, F, x0, y0, T, dt, stream, common, h0, k0)
    if bad >= 0:
        raise SimulationDivergence(float(path.grid[bad]))
    return path


def map_paths(fn: Callable[[int], object], n_paths: int,
              threads: int | None = 1, chunk: int = 256) -> Iterator:
    """Yield ``fn(p)`` for ``p = 0..n_paths-1`` in order.

    Work is spread over a thread pool (the kernel releases the GIL); the
    order of results never depends on the pool size.
    """
    if threads is None or threads <= 1:
        for p in range(n_paths):
            yield fn(p)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, n_paths, chunk):
            yield from pool.map(fn, range(start, min(start + chunk, n_paths)))


def simulate_batch(system: RegimeSystem, law: FeedbackLaw | None, x0, y0: int,
                   T: float, dt: float, n_paths: int, root_seed: int,
                   threads: int | None = 1) -> list:
    """Simulate ``n_paths`` paths; path ``p`` uses stream id ``p``."""
    F = _law_array(law, system)
    common = common_grid(T, dt, system.det_switch.times)

    def one(p):
        path, bad = _path(system, F, x0, y0, T, dt, SeededStream(root_seed, p),
                          common)
        if bad >= 0:
            raise SimulationDivergence(float(path.grid[bad]), p)
        return path

    return list(map_paths(one, n_paths, threads))


def batch_summary_csv(paths: Sequence[TrajectoryPath], out) -> None:
    """One row per path: final time, state, regime, eta and event counts."""
    m = paths[0].x.shape[1]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "time"] + [f"x_{i}" for i in range(m)]
                   + ["regime", "eta", "n_poisson", "n_regime_jump",
                      "n_det_switch"])
        for p, path in enumerate(paths):
            kinds = [e[1] for e in path.events]
            w.writerow([p, repr(path.T)] + [repr(float(v)) for v in path.x[-1]]
                       + [int(path.regime[-1]), int(path.eta[-1]),
                          kinds.count("poisson"), kinds.count("regime_jump"),
                          kinds.count("det_switch")])
