"""Coupled Riccati equations for the quadratic value matrices ``G[i, k]``.

For regime ``i`` and interval index ``k`` the algebraic equation is

    G A + A'G - G S G + sum_l Sig_l' G Sig_l + sum_j pi_j C_j' G C_j
      + sum_{j != i} q_ij (K_ij' G_j K_ij + sum_s Qs_s' G_j Qs_s - G) + M = 0

with ``S = B D^{-1} B'``.  The value after a regime transition is evaluated
with the matrix of the regime being entered (``G_j``), and the Poisson term
is that of a compensated jump ``x -> x + C x``.  The finite-horizon version
integrates ``dG/dt = -(left-hand side)`` backwards from ``G(T) = 0``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import CostWeights, RegimeSystem


class NonConvergence(RuntimeError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class IndefiniteIterate(RuntimeError):
    pass


class RiccatiDivergence(ArithmeticError):
    def __init__(self, time: float):
        self.time = time
        super().__init__(f"Riccati solution escaped at t = {time:.6g}")


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_outer: int = 500
    relaxation: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass(frozen=True)
class GainSet:
    """Symmetric matrices ``G[i, k]`` of shape ``(N, K, m, m)``.

    ``residual[i, k]`` is the Frobenius norm of the defining equation's
    residual as reported by the solver that produced the set (``None`` when
    no equation was solved, e.g. an assembled series).
    """

    G: np.ndarray
    residual: np.ndarray | None = None
    tol: float | None = None

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim == 3:
            G = G[:, None]
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        if self.residual is not None:
            res = np.array(self.residual, dtype=float).reshape(G.shape[:2])
            res.setflags(write=False)
            object.__setattr__(self, "residual", res)

    @property
    def N(self) -> int:
        return self.G.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.G.shape[1]

    def at(self, i: int, k: int = 0) -> np.ndarray:
        return self.G[i, min(k, self.G.shape[1] - 1)]

    def eigen_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Smallest and largest eigenvalue of each ``G[i, k]``.

        These are the constants of ``c1 |x|^2 <= x'Gx <= c2 |x|^2``.
        """
        lam = np.linalg.eigvalsh(self.G)
        return lam[..., 0], lam[..., -1]

    def positive_definite(self) -> np.ndarray:
        return self.eigen_bounds()[0] > 0

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.abs(self.G - np.swapaxes(self.G, -1, -2))
                           <= tol))

    def scaled(self, c: float) -> "GainSet":
        return GainSet(c * self.G, None, None)

    def to_dict(self) -> dict:
        return {"G": self.G.tolist(),
                "residual": (None if self.residual is None
                             else self.residual.tolist()),
                "tol": self.tol}

    @classmethod
    def from_dict(cls, data: dict) -> "GainSet":
        return cls(np.array(data["G"], dtype=float), data.get("residual"),
                   data.get("tol"))

    def save(self, path, extra: dict | None = None) -> None:
        out = dict(extra or {})
        out.update(self.to_dict())
        with open(path, "w") as fh:
            json.dump(out, fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "GainSet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# building blocks

def weight_arrays(system: RegimeSystem, weights: CostWeights):
    """Stacked ``M``, ``D^{-1}`` and ``S = B D^{-1} B'`` over (i, k)."""
    K = weights.n_intervals
    N = system.N
    M = np.array([[weights.M_at(i, k) for k in range(K)] for i in range(N)])
    Dinv = np.array([[np.linalg.inv(weights.D_at(i, k)) for k in range(K)]
                     for i in range(N)])
    B = system.packed.B
    S = np.einsum("iab,ikbc,idc->ikad", B, Dinv, B)
    return M, Dinv, S


def noise_term(P, G) -> np.ndarray:
    """``sum_l Sig'G Sig + sum_j pi_j C'G C`` for every (i, k)."""
    out = np.einsum("ilba,ikbc,ilcd->ikad", P.Sig, G, P.Sig)
    out += np.einsum("ij,ijba,ikbc,ijcd->ikad", P.pi, P.C, G, P.C)
    return out


def jump_coupling(P, G) -> np.ndarray:
    """``sum_{j!=i} q_ij (K_ij' G_j K_ij + sum_s Qs' G_j Qs)`` per (i, k)."""
    Q0 = P.Q - np.diag(np.diag(P.Q))
    out = np.einsum("ij,ijba,jkbc,ijcd->ikad", Q0, P.K, G, P.K)
    if P.Qs.shape[0]:
        QGQ = np.einsum("sba,jkbc,scd->jkad", P.Qs, G, P.Qs)
        out += np.einsum("ij,jkad->ikad", Q0, QGQ)
    return out


def _exit_rates(P) -> np.ndarray:
    Q0 = P.Q - np.diag(np.diag(P.Q))
    return Q0.sum(axis=1)


def _riccati_lhs(P, M, S, G) -> np.ndarray:
    GA = np.einsum("ikab,ibc->ikac", G, P.A)
    out = GA + np.swapaxes(GA, -1, -2) - G @ S @ G + noise_term(P, G)
    out += jump_coupling(P, G) - _exit_rates(P)[:, None, None, None] * G
    return out + M


def care_residual(system: RegimeSystem, weights: CostWeights,
                  G: GainSet | np.ndarray) -> np.ndarray:
    """Residual matrices of the coupled algebraic equation, shape (N,K,m,m)."""
    Gm = G.G if isinstance(G, GainSet) else np.asarray(G, dtype=float)
    if Gm.ndim == 3:
        Gm = Gm[:, None]
    M, _, S = weight_arrays(system, weights)
    if Gm.shape[0] != system.N or Gm.shape[2:] != (system.m, system.m):
        raise ValueError(f"G has shape {Gm.shape}, system needs "
                         f"({system.N}, K, {system.m}, {system.m})")
    if Gm.shape[1] != M.shape[1]:
        Gm = np.broadcast_to(Gm, M.shape) if Gm.shape[1] == 1 else Gm
        if Gm.shape[1] != M.shape[1]:
            raise ValueError("interval count of G and weights differ")
    return _riccati_lhs(system.packed, M, S, Gm)


def lyapunov_operator(Acl: np.ndarray, terms=(), shift: float = 0.0):
    """Matrix of ``X -> Acl'X + X Acl + sum_t w_t T_t' X T_t + shift X``.

    Acts on row-major ``X.ravel()``; ``terms`` is an iterable of ``(w, T)``.
    """
    m = Acl.shape[0]
    eye = np.eye(m)
    L = np.kron(Acl.T, eye) + np.kron(eye, Acl.T)
    for w, T in terms:
        if w != 0.0:
            L += w * np.kron(T.T, T.T)
    if shift:
        L += shift * np.eye(m * m)
    return L


def solve_lyapunov_like(Acl, terms, shift, rhs) -> np.ndarray:
    """Solve ``Acl'X + X Acl + sum w T'XT + shift X = rhs`` (dense)."""
    m = Acl.shape[0]
    L = lyapunov_operator(Acl, terms, shift)
    X = np.linalg.solve(L, np.asarray(rhs, dtype=float).ravel()).reshape(m, m)
    return 0.5 * (X + X.T)


def _noise_terms(P, i):
    terms = [(1.0, P.Sig[i, l]) for l in range(P.Sig.shape[1])]
    terms += [(P.pi[i, j], P.C[i, j]) for j in range(P.C.shape[1])]
    return terms


def _single_lhs(A, S, terms, shift, Mt, X):
    XA = X @ A
    out = XA + XA.T - X @ S @ X + shift * X + Mt
    for w, T in terms:
        out += w * (T.T @ X @ T)
    return out


def newton_kleinman(A, S, terms, shift, Mt, X0, tol, max_iter=60):
    """Newton iteration for one regime with frozen coupling.

    Solves ``XA + A'X - XSX + sum w T'XT + shift X + Mt = 0``; each step is
    the generalized Lyapunov equation of the linearization at the current
    iterate.  Steps that leave the positive semidefinite cone are damped by
    halving.
    """
    X = 0.5 * (X0 + X0.T)
    res = np.linalg.norm(_single_lhs(A, S, terms, shift, Mt, X))
    for _ in range(max_iter):
        if res <= tol:
            break
        Acl = A - S @ X
        try:
            Xn = solve_lyapunov_like(Acl, terms, shift, -(Mt + X @ S @ X))
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(f"singular Newton step: {exc}", res) from None
        scale = 1.0 + np.max(np.abs(Xn))
        alpha = 1.0
        while np.linalg.eigvalsh(X + alpha * (Xn - X))[0] < -1e-9 * scale:
            alpha *= 0.5
            if alpha < 2.0**-10:
                raise IndefiniteIterate(
                    "Newton iterate lost positive semidefiniteness")
        Xn = X + alpha * (Xn - X)
        new_res = np.linalg.norm(_single_lhs(A, S, terms, shift, Mt, Xn))
        if new_res >= res and alpha == 1.0 and res < 1e3 * tol:
            break  # at the rounding floor
        X, res = Xn, new_res
    return X


def _plain_care(A, B, M, D):
    try:
        X = scipy.linalg.solve_continuous_are(A, B, M, D)
    except (np.linalg.LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(X)):
        return None
    return 0.5 * (X + X.T)


def solve_coupled_care(system: RegimeSystem, weights: CostWeights,
                       opts: SolveOptions | None = None,
                       G0: np.ndarray | None = None) -> GainSet:
    """Solve the coupled algebraic equations by block Gauss-Seidel.

    Each sweep freezes the cross-regime coupling, solves every regime's
    stochastic Riccati equation by Newton-Kleinman and updates that regime's
    matrix immediately (optionally relaxed).  The loop stops when the
    largest residual norm over all (i, k) is at most ``opts.tol``.
    """
    opts = opts or SolveOptions()
    P = system.packed
    M, Dinv, S = weight_arrays(system, weights)
    N, K = M.shape[:2]
    m = system.m
    exit_rate = _exit_rates(P)
    Q0 = P.Q - np.diag(np.diag(P.Q))

    if G0 is not None:
        G = np.array(G0, dtype=float).reshape(N, K, m, m).copy()
    else:
        G = np.empty((N, K, m, m))
        for i in range(N):
            for k in range(K):
                X = _plain_care(P.A[i], P.B[i], M[i, k],
                                weights.D_at(i, k))
                G[i, k] = M[i, k] if X is None else X
    terms = [_noise_terms(P, i) for i in range(N)]
    inner_tol = 0.1 * opts.tol

    res = np.inf
    for _ in range(opts.max_outer):
        for k in range(K):
            for i in range(N):
                Mt = M[i, k].copy()
                for j in range(N):
                    if j != i and Q0[i, j] != 0.0:
                        Gj = G[j, k]
                        cpl = P.K[i, j].T @ Gj @ P.K[i, j]
                        for Qs in P.Qs:
                            cpl += Qs.T @ Gj @ Qs
                        Mt += Q0[i, j] * cpl
                Xi = newton_kleinman(P.A[i], S[i, k], terms[i], -exit_rate[i],
                                     Mt, G[i, k], inner_tol)
                G[i, k] = (1 - opts.relaxation) * G[i, k] + opts.relaxation * Xi
        R = _riccati_lhs(P, M, S, G)
        norms = np.linalg.norm(R, axis=(-2, -1))
        res = float(np.max(norms))
        if not np.isfinite(res):
            raise NonConvergence("iterates became non-finite", res)
        if res <= opts.tol:
            G = 0.5 * (G + np.swapaxes(G, -1, -2))
            norms = np.linalg.norm(_riccati_lhs(P, M, S, G), axis=(-2, -1))
            return GainSet(G, norms, opts.tol)
    raise NonConvergence(f"no convergence in {opts.max_outer} sweeps", res)


# ---------------------------------------------------------------------------
# finite horizon

@dataclass(frozen=True)
class RiccatiTrajectory:
    """``G`` on an ascending time grid; ``G[n]`` has shape ``(N, K, m, m)``."""

    times: np.ndarray
    G: np.ndarray
    psd: bool = field(default=True)

    def at_index(self, n: int) -> GainSet:
        return GainSet(self.G[n])

    def initial(self) -> GainSet:
        return GainSet(self.G[0])


def solve_riccati_ode(system: RegimeSystem, weights: CostWeights, T: float,
                      dt_g: float, schedule=None) -> RiccatiTrajectory:
    """Integrate the Riccati differential equations backwards with RK4.

    ``G(T) = 0`` and ``dG/dt = -(left-hand side of the algebraic equation)``.
    ``schedule`` optionally lists ``(t_start, system)`` pairs for
    piecewise-constant coefficients; the step is shortened so every
    breakpoint is a grid point.
    """
    if not (T > 0 and dt_g > 0):
        raise ValueError("T and dt_g must be positive")
    pieces = [(0.0, system)] if not schedule else sorted(
        [(float(t), s) for t, s in schedule], key=lambda p: p[0])
    if pieces[0][0] > 0:
        pieces.insert(0, (0.0, system))
    bounds = [p[0] for p in pieces if p[0] < T] + [T]
    prepared = []
    for t0, sys_ in pieces:
        if t0 >= T:
            continue
        M, _, S = weight_arrays(sys_, weights)
        prepared.append((sys_.packed, M, S))

    N, K = prepared[0][1].shape[:2]
    m = system.m
    G = np.zeros((N, K, m, m))
    times = [T]
    out = [G.copy()]
    psd = True
    for seg in range(len(prepared) - 1, -1, -1):
        P, M, S = prepared[seg]
        a, b = bounds[seg], bounds[seg + 1]
        n = max(1, int(np.ceil((b - a) / dt_g - 1e-9)))
        h = (b - a) / n

        def f(X):
            return _riccati_lhs(P, M, S, X)

        for step in range(n):
            k1 = f(G)
            k2 = f(G + 0.5 * h * k1)
            k3 = f(G + 0.5 * h * k2)
            k4 = f(G + h * k3)
            G = G + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = b - (step + 1) * h
            if not np.all(np.isfinite(G)) or np.max(np.abs(G)) > 1e12:
                raise RiccatiDivergence(t)
            G = 0.5 * (G + np.swapaxes(G, -1, -2))
            times.append(t)
            out.append(G.copy())
            if np.linalg.eigvalsh(G).min() < -1e-10 * (1 + np.abs(G).max()):
                psd = False
    times = np.array(times[::-1])
    times[0] = 0.0
    Garr = np.array(out[::-1])
    if not psd:
        warnings.warn("Riccati trajectory left the positive semidefinite cone",
                      RuntimeWarning, stacklevel=2)
    return RiccatiTrajectory(times, Garr, psd)
