"""Small-parameter series for the coupled Riccati equations.

Two expansions ``G = sum_r eps^r G^(r)`` are supported.

Rare switching (case I): ``Q = eps * R``.  Order zero is one uncoupled
stochastic Riccati equation per regime; order ``r`` solves

    At' X + X At + Pi_i(X) = -sum_{j!=i} R_ij (K_ij' G_j^(r-1) K_ij
                                  + sum_s Qs' G_j^(r-1) Qs - G_i^(r-1))
                             + sum_{q=1}^{r-1} G^(q) S G^(r-q)

with ``At = A - S G^(0)`` and ``Pi_i(X) = sum Sig'X Sig + sum pi C'X C``.

Small jumps (case II): ``K_ij = I + eps Kh_ij`` and ``Qs = eps Qh_s``.  Order
zero is the coupled equation with identity jumps; order ``r`` is the linear
system, coupled across regimes,

    At' X_i + X_i At + Pi_i(X_i) + sum_{j!=i} q_ij (X_j - X_i) = Phi_i^(r)

    Phi_i^(r) = sum_{q=1}^{r-1} G^(q) S G^(r-q)
                - sum_{j!=i} q_ij (Kh' G_j^(r-1) + G_j^(r-1) Kh
                                   + Kh' G_j^(r-2) Kh + sum_s Qh' G_j^(r-2) Qh).

Both follow from substituting the series into the algebraic equation and
matching powers of ``eps``; the quadratic term contributes the symmetric
convolution ``sum_q G^(q) S G^(r-q)``.  See ``docs/derivation.md``.

Convergence is bounded with a scalar majorant: if ``L_r = max |G^(r)|`` obeys
``L_r <= c (sum_{q=1}^{r-1} L_q L_{r-q} + L_{r-1})``, then ``L_r <= rho_r``
where ``rho(eps) = sum eps^r rho_r`` is the root of
``rho^2 + (a + eps) rho + b = 0`` with ``rho_0 = L_0``, and the series
converges for ``eps`` below ``-a - 2 sqrt(b)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import CostWeights, RegimeJumpSpec, RegimeSystem
from .riccati import (GainSet, SolveOptions, _noise_terms, lyapunov_operator,
                      solve_coupled_care, weight_arrays)


class PerturbationError(RuntimeError):
    def __init__(self, message: str, order: int | None = None):
        self.order = order
        prefix = "" if order is None else f"order {order}: "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class MajorantBound:
    a: float
    b: float
    rho0: float
    radius: float


@dataclass(frozen=True)
class Majorant:
    """Majorant constants together with the coefficient norms they bound."""

    L0: float
    c: float
    a: float
    b: float
    rho0: float
    radius: float
    L: tuple = ()
    rho: tuple = ()

    def valid(self) -> bool:
        """True if every computed ``L_r`` is dominated by ``rho_r``."""
        return all(Lr <= rr * (1 + 1e-12) + 1e-300
                   for Lr, rr in zip(self.L, self.rho))

    def to_dict(self) -> dict:
        return {"L0": self.L0, "c": self.c, "a": self.a, "b": self.b,
                "rho0": self.rho0, "radius": self.radius,
                "L": list(self.L), "rho": list(self.rho)}


@dataclass(frozen=True)
class SeriesSolution:
    """Series coefficients ``coeffs[r]`` of shape ``(N, K, m, m)``."""

    coeffs: np.ndarray
    eps: float
    order: int
    majorant: Majorant | None
    case: str = "I"
    residual0: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"case": self.case, "eps": self.eps, "order": self.order,
                "coeffs": self.coeffs.tolist(),
                "majorant": None if self.majorant is None
                else self.majorant.to_dict()}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def majorant_radius(L0: float, c: float) -> MajorantBound:
    """Coefficients of the majorant quadratic and its convergence radius."""
    if not (L0 > 0 and c > 0):
        raise ValueError("L0 and c must be positive")
    a = -(1.0 / c + 2.0 * L0)
    b = L0 / c + L0 * L0
    rho0 = -a / 2.0 - math.sqrt(a * a / 4.0 - b)
    radius = -a - 2.0 * math.sqrt(b)
    return MajorantBound(a, b, rho0, radius)


def majorant_sequence(rho0: float, a: float, order: int) -> list:
    """Coefficients ``rho_0..rho_order`` of the majorant root's expansion."""
    rho = [rho0]
    denom = 2.0 * rho0 + a
    for r in range(1, order + 1):
        conv = sum(rho[q] * rho[r - q] for q in range(1, r))
        rho.append(-(conv + rho[r - 1]) / denom)
    return rho


def estimate_majorant_constant(L) -> float:
    """Smallest ``c`` with ``L_r <= c (sum L_q L_{r-q} + L_{r-1})`` for r>=1.

    Returns ``inf`` when some ``L_r > 0`` has a zero bracket, and a tiny
    positive number when no order constrains ``c``.
    """
    c = 0.0
    for r in range(1, len(L)):
        bracket = sum(L[q] * L[r - q] for q in range(1, r)) + L[r - 1]
        if L[r] == 0.0:
            continue
        if bracket == 0.0:
            return math.inf
        c = max(c, L[r] / bracket)
    return c if c > 0 else np.finfo(float).eps


def _majorant(coeffs) -> Majorant | None:
    L = [float(np.max(np.linalg.norm(Gr, axis=(-2, -1)))) for Gr in coeffs]
    if not L[0] > 0:
        return None
    c = estimate_majorant_constant(L)
    if math.isinf(c):
        return Majorant(L[0], c, -math.inf, math.inf, L[0], 0.0, tuple(L), ())
    mb = majorant_radius(L[0], c)
    rho = majorant_sequence(L[0], mb.a, len(L) - 1)
    return Majorant(L[0], c, mb.a, mb.b, mb.rho0, mb.radius, tuple(L),
                    tuple(rho))


def _sym(X):
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def _convolution(coeffs, S, r):
    """``sum_{q=1}^{r-1} G^(q) S G^(r-q)`` for every (i, k)."""
    out = np.zeros_like(coeffs[0])
    for q in range(1, r):
        out += coeffs[q] @ S @ coeffs[r - q]
    return out


def _order_zero_checked(sol: GainSet, order_label: str):
    if not np.all(sol.positive_definite()):
        raise PerturbationError(
            f"{order_label} solution is not positive definite", 0)
    return sol


def solve_case1(system: RegimeSystem, weights: CostWeights, r_ij, eps: float,
                R: int, opts: SolveOptions | None = None) -> SeriesSolution:
    """Series in the switching intensity ``Q = eps * r_ij``."""
    r_ij = np.asarray(r_ij, dtype=float)
    if R < 0:
        raise ValueError("order R must be >= 0")
    if np.max(np.abs(system.Q - eps * r_ij)) > 1e-12:
        raise ValueError("system Q is not eps * r_ij")
    P = system.packed
    base = system.replace(Q=np.zeros_like(system.Q))
    sol0 = solve_coupled_care(base, weights, opts)
    M, _, S = weight_arrays(system, weights)
    N, K = M.shape[:2]
    m = system.m
    G0 = sol0.G.copy()
    coeffs = [G0]
    R0 = r_ij - np.diag(np.diag(r_ij))
    ops = {}
    for i in range(N):
        for k in range(K):
            Acl = P.A[i] - S[i, k] @ G0[i, k]
            ops[i, k] = lyapunov_operator(Acl, _noise_terms(P, i))
    for r in range(1, R + 1):
        prev = coeffs[r - 1]
        Gr = np.zeros((N, K, m, m))
        conv = _convolution(coeffs, S, r)
        for i in range(N):
            for k in range(K):
                rhs = conv[i, k].copy()
                for j in range(N):
                    if j == i or R0[i, j] == 0.0:
                        continue
                    Gj = prev[j, k]
                    br = P.K[i, j].T @ Gj @ P.K[i, j] - prev[i, k]
                    for Qs in P.Qs:
                        br += Qs.T @ Gj @ Qs
                    rhs -= R0[i, j] * br
                rhs = _sym(rhs)
                try:
                    X = np.linalg.solve(ops[i, k], rhs.ravel())
                except np.linalg.LinAlgError:
                    raise PerturbationError("singular linear operator", r) \
                        from None
                Gr[i, k] = _sym(X.reshape(m, m))
        coeffs.append(Gr)
    coeffs = np.array(coeffs)
    maj = _majorant(coeffs)
    if not np.all(sol0.positive_definite()):
        warnings.warn("order-0 solution is not positive definite",
                      RuntimeWarning, stacklevel=2)
    return SeriesSolution(coeffs, float(eps), int(R), maj, "I",
                          sol0.residual)


def _hat_array(K_hat, N, m):
    Kh = np.asarray(K_hat, dtype=float)
    if Kh.shape == (m, m):
        Kh = np.broadcast_to(Kh, (N, N, m, m)).copy()
    elif Kh.shape != (N, N, m, m):
        raise ValueError(f"K_hat must be ({m},{m}) or ({N},{N},{m},{m})")
    for i in range(N):
        Kh[i, i] = 0.0
    return Kh


def solve_case2(system: RegimeSystem, weights: CostWeights, K_hat, Q_hat,
                eps: float, R: int,
                opts: SolveOptions | None = None) -> SeriesSolution:
    """Series in the jump size ``K = I + eps * K_hat``, ``Qs = eps * Q_hat``."""
    if R < 0:
        raise ValueError("order R must be >= 0")
    P = system.packed
    N, m = system.N, system.m
    Kh = _hat_array(K_hat, N, m)
    Qh = np.asarray(Q_hat, dtype=float).reshape(-1, m, m)
    eye = np.eye(m)
    for i in range(N):
        for j in range(N):
            if i != j and np.max(np.abs(P.K[i, j] - eye - eps * Kh[i, j])) > 1e-12:
                raise ValueError(f"K[{i}][{j}] is not I + eps * K_hat")
    Qs_sys = P.Qs
    if Qs_sys.shape[0] != Qh.shape[0]:
        if not (Qh.shape[0] == 0 and np.max(np.abs(Qs_sys), initial=0) <= 1e-12):
            raise ValueError("Qs and Q_hat have different lengths")
    elif Qh.shape[0] and np.max(np.abs(Qs_sys - eps * Qh)) > 1e-12:
        raise ValueError("Qs is not eps * Q_hat")

    base = system.replace(regime_jump=RegimeJumpSpec.identity(N, m))
    sol0 = _order_zero_checked(solve_coupled_care(base, weights, opts),
                               "coupled order-0")
    M, _, S = weight_arrays(system, weights)
    K = M.shape[1]
    Q0 = P.Q - np.diag(np.diag(P.Q))
    exit_rate = Q0.sum(axis=1)
    G0 = sol0.G.copy()
    coeffs = [G0]
    m2 = m * m
    big = {}
    for k in range(K):
        L = np.zeros((N * m2, N * m2))
        for i in range(N):
            Acl = P.A[i] - S[i, k] @ G0[i, k]
            blk = lyapunov_operator(Acl, _noise_terms(P, i), -exit_rate[i])
            L[i * m2:(i + 1) * m2, i * m2:(i + 1) * m2] = blk
            for j in range(N):
                if j != i and Q0[i, j] != 0.0:
                    L[i * m2:(i + 1) * m2, j * m2:(j + 1) * m2] = \
                        Q0[i, j] * np.eye(m2)
        big[k] = L
    zero = np.zeros_like(G0)
    for r in range(1, R + 1):
        g1 = coeffs[r - 1]
        g2 = coeffs[r - 2] if r >= 2 else zero
        phi = _convolution(coeffs, S, r)
        for i in range(N):
            for k in range(K):
                for j in range(N):
                    if j == i or Q0[i, j] == 0.0:
                        continue
                    Kij = Kh[i, j]
                    t = Kij.T @ g1[j, k] + g1[j, k] @ Kij \
                        + Kij.T @ g2[j, k] @ Kij
                    for Qs in Qh:
                        t += Qs.T @ g2[j, k] @ Qs
                    phi[i, k] -= Q0[i, j] * t
        phi = _sym(phi)
        Gr = np.zeros((N, K, m, m))
        for k in range(K):
            try:
                X = np.linalg.solve(big[k], phi[:, k].reshape(-1))
            except np.linalg.LinAlgError:
                raise PerturbationError("singular linear operator", r) \
                    from None
            Gr[:, k] = _sym(X.reshape(N, m, m))
        coeffs.append(Gr)
    coeffs = np.array(coeffs)
    return SeriesSolution(coeffs, float(eps), int(R), _majorant(coeffs), "II",
                          sol0.residual)


def assemble_series(sol: SeriesSolution) -> GainSet:
    """Truncated sum ``sum_{r<=R} eps^r G^(r)``."""
    if sol.majorant is not None and sol.eps > sol.majorant.radius:
        warnings.warn(f"eps = {sol.eps:g} exceeds the majorant radius "
                      f"{sol.majorant.radius:g}", RuntimeWarning,
                      stacklevel=2)
    G = np.zeros_like(sol.coeffs[0])
    for r in range(sol.order, -1, -1):
        G = G * sol.eps + sol.coeffs[r]
    G = _sym(G)
    gs = GainSet(G)
    if not np.all(gs.positive_definite()):
        warnings.warn("assembled series is not positive definite",
                      RuntimeWarning, stacklevel=2)
    return gs
