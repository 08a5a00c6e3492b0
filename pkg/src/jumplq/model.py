"""Regime-switching linear jump-diffusion model, cost weights and model files.

The controlled system in regime ``i`` is

    dx = (A_i x + B_i u) dt + sum_l Sigma_il x dw_l + sum_j C_ij x (dN_j - pi_ij dt)

with three kinds of state jumps:

* Poisson marks ``j`` with intensity ``pi_ij`` (compensated above),
* a jump ``x <- K_ij x + sum_s xi_s Qs_s x`` whenever the regime chain moves
  from ``i`` to ``j``,
* a jump ``x <- J_h x`` at each deterministic switch time, where ``h`` is the
  new state of a discrete Markov chain with transition matrix ``P_H``.

All containers are frozen; the arrays they hold are flagged read-only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

XI_LAWS = ("rademacher", "standard_normal")


class ModelFormatError(ValueError):
    """Model file could not be parsed into the documented schema."""


class ModelDimensionError(ModelFormatError):
    """A matrix in a model file has the wrong shape.

    ``field`` names the offending entry, e.g. ``"A[0]"``.
    """

    def __init__(self, field_name: str, expected, got):
        self.field = field_name
        self.expected = tuple(expected)
        self.got = tuple(got)
        super().__init__(
            f"{field_name}: expected shape {self.expected}, got {self.got}")


def _frozen(a, ndim=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        if arr.size == 1 and ndim == 2:
            arr = arr.reshape(1, 1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PoissonMark:
    """One atom of the finite marked Poisson measure."""

    weight: float
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "C", _frozen(self.C, 2))


@dataclass(frozen=True)
class RegimeJumpSpec:
    """State jump applied at a regime transition ``i -> j``.

    ``K[i][j]`` is the deterministic part; ``Qs`` are the random components
    multiplied by i.i.d. zero-mean, unit-variance coefficients.
    """

    K: tuple
    Qs: tuple = ()
    xi_law: str = "rademacher"

    def __post_init__(self):
        K = tuple(tuple(_frozen(k, 2) for k in row) for row in self.K)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "Qs", tuple(_frozen(q, 2) for q in self.Qs))

    @classmethod
    def identity(cls, N: int, m: int) -> "RegimeJumpSpec":
        eye = np.eye(m)
        return cls(K=[[eye] * N for _ in range(N)])


@dataclass(frozen=True)
class DeterministicSwitchSpec:
    """Jumps ``x <- J_h x`` at fixed times ``t_1 < t_2 < ...``.

    ``min_gap`` is the required lower bound on consecutive gaps (the first
    gap is measured from ``t_0 = 0``); ``max_gap`` is an optional upper bound.
    """

    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    P_H: np.ndarray = field(default_factory=lambda: np.ones((1, 1)))
    h0: int = 0
    J: tuple = ()
    min_gap: float = 1e-9
    max_gap: float | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "P_H", _frozen(self.P_H, 2))
        object.__setattr__(self, "h0", int(self.h0))
        object.__setattr__(self, "J", tuple(_frozen(j, 2) for j in self.J))

    @property
    def H(self) -> int:
        return self.P_H.shape[0]

    @classmethod
    def empty(cls, m: int) -> "DeterministicSwitchSpec":
        return cls(times=[], P_H=np.ones((1, 1)), h0=0, J=[np.eye(m)])


class PackedSystem(NamedTuple):
    """Stacked, zero-padded coefficient arrays used by the numerical code."""

    A: np.ndarray      # (N, m, m)
    B: np.ndarray      # (N, m, r)
    Sig: np.ndarray    # (N, d, m, m)
    pi: np.ndarray     # (N, J)
    C: np.ndarray      # (N, J, m, m)
    Q: np.ndarray      # (N, N)
    K: np.ndarray      # (N, N, m, m)
    Qs: np.ndarray     # (S, m, m)
    Jh: np.ndarray     # (H, m, m)


@dataclass(frozen=True)
class RegimeSystem:
    """Linear regime-switching jump-diffusion with jump rules.

    Per-regime data are tuples indexed by regime; shapes are not enforced
    here so that :func:`validate` can report every inconsistency.
    """

    m: int
    r: int
    N: int
    A: tuple
    B: tuple
    Sigma: tuple
    poisson: tuple
    Q: np.ndarray
    regime_jump: RegimeJumpSpec
    det_switch: DeterministicSwitchSpec

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(_frozen(a, 2) for a in self.A))
        object.__setattr__(self, "B", tuple(_frozen(b, 2) for b in self.B))
        object.__setattr__(self, "Sigma", tuple(
            tuple(_frozen(s, 2) for s in sig) for sig in self.Sigma))
        object.__setattr__(self, "poisson", tuple(
            tuple(p if isinstance(p, PoissonMark) else PoissonMark(*p)
                  for p in marks) for marks in self.poisson))
        object.__setattr__(self, "Q", _frozen(self.Q, 2))

    @classmethod
    def create(cls, A, B, Q=None, Sigma=None, poisson=None, K=None, Qs=(),
               xi_law="rademacher", det_switch=None) -> "RegimeSystem":
        """Build a system from per-regime lists, filling in defaults.

        Missing pieces default to: no regime switching (``Q = 0``), no
        noise, no Poisson marks, identity regime jumps and no
        deterministic switches.
        """
        A = [np.atleast_2d(np.asarray(a, dtype=float)) for a in A]
        B = [np.asarray(b, dtype=float) for b in B]
        N = len(A)
        m = A[0].shape[0]
        B = [b.reshape(m, -1) if b.ndim < 2 else b for b in B]
        r = B[0].shape[1]
        if Q is None:
            Q = np.zeros((N, N))
        if Sigma is None:
            Sigma = [[] for _ in range(N)]
        if poisson is None:
            poisson = [[] for _ in range(N)]
        if K is None:
            jump = RegimeJumpSpec.identity(N, m)
            jump = RegimeJumpSpec(K=jump.K, Qs=Qs, xi_law=xi_law)
        else:
            jump = RegimeJumpSpec(K=K, Qs=Qs, xi_law=xi_law)
        if det_switch is None:
            det_switch = DeterministicSwitchSpec.empty(m)
        return cls(m=m, r=r, N=N, A=A, B=B, Sigma=Sigma, poisson=poisson,
                   Q=Q, regime_jump=jump, det_switch=det_switch)

    def replace(self, **changes) -> "RegimeSystem":
        """Copy with some fields replaced (packed cache is not carried)."""
        fields = dict(m=self.m, r=self.r, N=self.N, A=self.A, B=self.B,
                      Sigma=self.Sigma, poisson=self.poisson, Q=self.Q,
                      regime_jump=self.regime_jump, det_switch=self.det_switch)
        fields.update(changes)
        return RegimeSystem(**fields)

    @cached_property
    def packed(self) -> PackedSystem:
        m, r, N = self.m, self.r, self.N
        d = max((len(s) for s in self.Sigma), default=0)
        nj = max((len(p) for p in self.poisson), default=0)
        Sig = np.zeros((N, d, m, m))
        pi = np.zeros((N, nj))
        C = np.zeros((N, nj, m, m))
        for i in range(N):
            for l, s in enumerate(self.Sigma[i]):
                Sig[i, l] = s
            for j, mark in enumerate(self.poisson[i]):
                pi[i, j] = mark.weight
                C[i, j] = mark.C
        K = np.array([[self.regime_jump.K[i][j] for j in range(N)]
                      for i in range(N)], dtype=float).reshape(N, N, m, m)
        Qs = np.array(self.regime_jump.Qs, dtype=float).reshape(-1, m, m)
        ds = self.det_switch
        Jh = (np.array(ds.J, dtype=float).reshape(-1, m, m) if ds.J
              else np.eye(m)[None])
        out = PackedSystem(np.array(self.A).reshape(N, m, m),
                           np.array(self.B).reshape(N, m, r),
                           Sig, pi, C, np.array(self.Q), K, Qs, Jh)
        for a in out:
            a.setflags(write=False)
        return out


@dataclass(frozen=True)
class CostWeights:
    """Running-cost weights ``x'M x + u'D u`` per (regime, interval index).

    ``M[i]`` and ``D[i]`` are tuples over the interval index ``k``; a single
    entry means the same weights for every interval.
    """

    M: tuple
    D: tuple
    d_min: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "M", _per_k(self.M))
        object.__setattr__(self, "D", _per_k(self.D))

    @classmethod
    def create(cls, M, D, d_min=1e-10) -> "CostWeights":
        return cls(M=M, D=D, d_min=d_min)

    @property
    def n_intervals(self) -> int:
        return max(max(len(x) for x in self.M), max(len(x) for x in self.D))

    def M_at(self, i: int, k: int) -> np.ndarray:
        Mi = self.M[i]
        return Mi[min(k, len(Mi) - 1)]

    def D_at(self, i: int, k: int) -> np.ndarray:
        Di = self.D[i]
        return Di[min(k, len(Di) - 1)]

    def scaled(self, c: float) -> "CostWeights":
        return CostWeights(M=[[c * x for x in Mi] for Mi in self.M],
                           D=[[c * x for x in Di] for Di in self.D],
                           d_min=self.d_min)


def _per_k(entries) -> tuple:
    out = []
    for e in entries:
        arr = np.asarray(e, dtype=float)
        if arr.ndim <= 2:
            out.append((_frozen(np.atleast_2d(arr), 2),))
        else:
            out.append(tuple(_frozen(x, 2) for x in arr))
    return tuple(out)


# ---------------------------------------------------------------------------
# validation

@dataclass
class ValidationReport:
    """Outcome of :func:`validate`.

    ``lipschitz`` is the Lipschitz constant of the linear coefficients;
    ``growth_bound`` is the constant of the uniform boundedness condition,
    which is zero for linear maps.  ``max_gap`` is the largest gap between
    consecutive deterministic switch times (``inf`` without switches).
    """

    violations: list
    lipschitz: float
    max_gap: float
    growth_bound: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        lines = [f"ok: {self.ok}",
                 f"L: {self.lipschitz:.17g}",
                 f"Delta: {self.max_gap:.17g}",
                 f"C: {self.growth_bound:g}"]
        lines += [f"violation: {v}" for v in self.violations]
        return "\n".join(lines)


def _shape_ok(arr, shape) -> bool:
    return tuple(np.shape(arr)) == tuple(shape)


def _opnorm(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def validate(system: RegimeSystem, weights: CostWeights) -> ValidationReport:
    """Check every structural invariant of a model.

    Problems are collected, never raised.  The Lipschitz constant is the
    maximum over regimes of ``|A_i| + sum_l |Sigma_il| + sum_j pi_ij |C_ij|``
    plus ``max_h |J_h - I|`` (the deterministic jump increment), all in the
    spectral norm.
    """
    v = []
    m, r, N = system.m, system.r, system.N
    for name, val in (("m", m), ("r", r), ("N", N)):
        if not (isinstance(val, (int, np.integer)) and val > 0):
            v.append(f"{name} must be a positive integer, got {val!r}")
    if v:
        return ValidationReport(v, float("nan"), float("nan"))

    for name, seq in (("A", system.A), ("B", system.B),
                      ("Sigma", system.Sigma), ("PoissonJump", system.poisson)):
        if len(seq) != N:
            v.append(f"{name} has {len(seq)} regimes, expected {N}")
    for i, a in enumerate(system.A):
        if not _shape_ok(a, (m, m)):
            v.append(f"A[{i}] has shape {np.shape(a)}, expected {(m, m)}")
    for i, b in enumerate(system.B):
        if not _shape_ok(b, (m, r)):
            v.append(f"B[{i}] has shape {np.shape(b)}, expected {(m, r)}")
    for i, sig in enumerate(system.Sigma):
        for l, s in enumerate(sig):
            if not _shape_ok(s, (m, m)):
                v.append(f"Sigma[{i}][{l}] has shape {np.shape(s)}, "
                         f"expected {(m, m)}")
    for i, marks in enumerate(system.poisson):
        for j, mark in enumerate(marks):
            if not _shape_ok(mark.C, (m, m)):
                v.append(f"PoissonJump[{i}][{j}].C has shape "
                         f"{np.shape(mark.C)}, expected {(m, m)}")
            if not mark.weight >= 0:
                v.append(f"PoissonJump[{i}][{j}] weight {mark.weight:g} < 0")

    Q = system.Q
    if not _shape_ok(Q, (N, N)):
        v.append(f"Q has shape {Q.shape}, expected {(N, N)}")
    else:
        for i in range(N):
            s = float(np.sum(Q[i]))
            if abs(s) > 1e-12:
                v.append(f"Q row {i} sums to {s:g}")
            for j in range(N):
                if i != j and Q[i, j] < 0:
                    v.append(f"Q[{i}][{j}] = {Q[i, j]:g} is a negative "
                             "off-diagonal rate")

    rj = system.regime_jump
    if rj.xi_law not in XI_LAWS:
        v.append(f"xi_law {rj.xi_law!r} not in {XI_LAWS}")
    if len(rj.K) != N or any(len(row) != N for row in rj.K):
        v.append(f"regime_jump.K must be {N}x{N}")
    else:
        for i in range(N):
            for j in range(N):
                if not _shape_ok(rj.K[i][j], (m, m)):
                    v.append(f"K[{i}][{j}] has shape {rj.K[i][j].shape}, "
                             f"expected {(m, m)}")
                elif i == j and not np.array_equal(rj.K[i][i], np.eye(m)):
                    v.append(f"K[{i}][{i}] is not the identity")
    for s, q in enumerate(rj.Qs):
        if not _shape_ok(q, (m, m)):
            v.append(f"Qs[{s}] has shape {q.shape}, expected {(m, m)}")

    ds = system.det_switch
    H = ds.P_H.shape[0] if ds.P_H.ndim == 2 else 0
    if not _shape_ok(ds.P_H, (H, H)) or H == 0:
        v.append(f"P_H has shape {ds.P_H.shape}, expected square")
    else:
        if np.any(ds.P_H < 0):
            v.append("P_H has negative entries")
        for h in range(H):
            s = float(np.sum(ds.P_H[h]))
            if abs(s - 1.0) > 1e-12:
                v.append(f"P_H row {h} sums to {s:g}")
        if not 0 <= ds.h0 < H:
            v.append(f"h0 = {ds.h0} outside 0..{H - 1}")
        if len(ds.J) != H:
            v.append(f"det_switch.J has {len(ds.J)} entries, expected {H}")
    for h, Jh in enumerate(ds.J):
        if not _shape_ok(Jh, (m, m)):
            v.append(f"J[{h}] has shape {Jh.shape}, expected {(m, m)}")
    gaps = np.diff(np.concatenate([[0.0], ds.times]))
    if ds.times.size:
        if np.any(gaps <= 0):
            v.append("det_switch.times not strictly increasing from 0")
        if not ds.min_gap > 0:
            v.append(f"det_switch.min_gap {ds.min_gap:g} must be > 0")
        elif np.min(gaps) < ds.min_gap:
            v.append(f"det_switch gap {np.min(gaps):g} below min_gap "
                     f"{ds.min_gap:g}")
        if ds.max_gap is not None and np.max(gaps) > ds.max_gap:
            v.append(f"det_switch gap {np.max(gaps):g} exceeds max_gap "
                     f"{ds.max_gap:g}")
    max_gap = float(np.max(gaps)) if ds.times.size else float("inf")

    _check_weights(weights, system, v)

    if v and any("shape" in s or "regimes" in s for s in v):
        lip = float("nan")
    else:
        jump_term = max((_opnorm(Jh - np.eye(m)) for Jh in ds.J), default=0.0)
        lip = 0.0
        for i in range(N):
            val = (_opnorm(system.A[i])
                   + sum(_opnorm(s) for s in system.Sigma[i])
                   + sum(mk.weight * _opnorm(mk.C) for mk in system.poisson[i]))
            lip = max(lip, val)
        lip += jump_term
    return ValidationReport(v, lip, max_gap)


def _check_weights(weights, system, v):
    m, r, N = system.m, system.r, system.N
    for name, entries, n in (("M", weights.M, m), ("D", weights.D, r)):
        if len(entries) != N:
            v.append(f"weights.{name} has {len(entries)} regimes, expected {N}")
        for i, per_k in enumerate(entries):
            for k, w in enumerate(per_k):
                loc = f"{name}[{i}][{k}]"
                if not _shape_ok(w, (n, n)):
                    v.append(f"{loc} has shape {w.shape}, expected {(n, n)}")
                    continue
                if np.max(np.abs(w - w.T)) > 1e-12:
                    v.append(f"{name} not symmetric at {loc}")
                    continue
                lam = np.linalg.eigvalsh(w)
                if name == "M" and lam[0] < -1e-10:
                    v.append(f"M not positive semidefinite at {loc} "
                             f"(min eigenvalue {lam[0]:g})")
                if name == "D" and lam[0] < weights.d_min:
                    v.append(f"D not positive definite at {loc} "
                             f"(min eigenvalue {lam[0]:g})")


# ---------------------------------------------------------------------------
# model files

def _tolist(a):
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(system: RegimeSystem, weights: CostWeights) -> dict:
    ds = system.det_switch
    rj = system.regime_jump
    det = {"times": _tolist(ds.times), "P_H": _tolist(ds.P_H), "h0": ds.h0,
           "J": [_tolist(j) for j in ds.J], "min_gap": ds.min_gap}
    if ds.max_gap is not None:
        det["max_gap"] = ds.max_gap

    def per_k(entries):
        return [_tolist(e[0]) if len(e) == 1 else [_tolist(x) for x in e]
                for e in entries]

    return {
        "m": system.m, "r": system.r, "N": system.N,
        "regimes": [
            {"A": _tolist(system.A[i]), "B": _tolist(system.B[i]),
             "Sigma": [_tolist(s) for s in system.Sigma[i]],
             "PoissonJump": [{"weight": p.weight, "C": _tolist(p.C)}
                             for p in system.poisson[i]]}
            for i in range(system.N)],
        "Q": _tolist(system.Q),
        "regime_jump": {"K": [[_tolist(k) for k in row] for row in rj.K],
                        "Qs": [_tolist(q) for q in rj.Qs],
                        "xi_law": rj.xi_law},
        "det_switch": det,
        "weights": {"M": per_k(weights.M), "D": per_k(weights.D),
                    "d_min": weights.d_min},
    }


def save_model(path, system: RegimeSystem, weights: CostWeights) -> None:
    Path(path).write_text(json.dumps(model_to_dict(system, weights), indent=1)
                          + "\n")


def _matrix(obj, name, shape):
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{name}: not a numeric matrix ({exc})") from None
    if shape is not None and arr.shape != tuple(shape):
        raise ModelDimensionError(name, shape, arr.shape)
    return arr


def _require(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise ModelFormatError(f"missing field '{key}' in {where}")
    return d[key]


def model_from_dict(data: dict) -> tuple[RegimeSystem, CostWeights]:
    """Build ``(system, weights)`` from the parsed JSON document.

    Raises :class:`ModelDimensionError` naming the first mis-shaped field.
    """
    m = _require(data, "m", "model")
    r = _require(data, "r", "model")
    N = _require(data, "N", "model")
    for name, val in (("m", m), ("r", r), ("N", N)):
        if not isinstance(val, int) or isinstance(val, bool) or val <= 0:
            raise ModelFormatError(f"{name}: expected positive integer, "
                                   f"got {val!r}")
    regimes = _require(data, "regimes", "model")
    if len(regimes) != N:
        raise ModelDimensionError("regimes", (N,), (len(regimes),))
    A, B, Sigma, poisson = [], [], [], []
    for i, reg in enumerate(regimes):
        A.append(_matrix(_require(reg, "A", f"regimes[{i}]"), f"A[{i}]",
                         (m, m)))
        B.append(_matrix(_require(reg, "B", f"regimes[{i}]"), f"B[{i}]",
                         (m, r)))
        Sigma.append([_matrix(s, f"Sigma[{i}][{l}]", (m, m))
                      for l, s in enumerate(reg.get("Sigma", []))])
        marks = []
        for j, pj in enumerate(reg.get("PoissonJump", [])):
            w = _require(pj, "weight", f"PoissonJump[{i}][{j}]")
            C = _matrix(_require(pj, "C", f"PoissonJump[{i}][{j}]"),
                        f"PoissonJump[{i}][{j}].C", (m, m))
            marks.append(PoissonMark(float(w), C))
        poisson.append(marks)
    Q = _matrix(data.get("Q", np.zeros((N, N)).tolist()), "Q", (N, N))

    rj = data.get("regime_jump")
    if rj is None:
        jump = RegimeJumpSpec.identity(N, m)
    else:
        Kraw = rj.get("K")
        if Kraw is None:
            K = RegimeJumpSpec.identity(N, m).K
        else:
            if len(Kraw) != N or any(len(row) != N for row in Kraw):
                raise ModelDimensionError("K", (N, N),
                                          (len(Kraw), len(Kraw[0]) if Kraw else 0))
            K = [[_matrix(Kraw[i][j], f"K[{i}][{j}]", (m, m))
                  for j in range(N)] for i in range(N)]
        Qs = [_matrix(q, f"Qs[{s}]", (m, m))
              for s, q in enumerate(rj.get("Qs", []))]
        jump = RegimeJumpSpec(K=K, Qs=Qs,
                              xi_law=rj.get("xi_law", "rademacher"))

    ds = data.get("det_switch")
    if ds is None:
        det = DeterministicSwitchSpec.empty(m)
    else:
        P_H = _matrix(ds.get("P_H", [[1.0]]), "P_H", None)
        if P_H.ndim != 2 or P_H.shape[0] != P_H.shape[1]:
            raise ModelDimensionError("P_H", ("H", "H"), P_H.shape)
        H = P_H.shape[0]
        Jraw = ds.get("J", [np.eye(m).tolist()] * H)
        if len(Jraw) != H:
            raise ModelDimensionError("J", (H,), (len(Jraw),))
        J = [_matrix(j, f"J[{h}]", (m, m)) for h, j in enumerate(Jraw)]
        det = DeterministicSwitchSpec(
            times=_matrix(ds.get("times", []), "times", None).reshape(-1),
            P_H=P_H, h0=int(ds.get("h0", 0)), J=J,
            min_gap=float(ds.get("min_gap", 1e-9)),
            max_gap=None if ds.get("max_gap") is None else float(ds["max_gap"]))

    system = RegimeSystem(m=m, r=r, N=N, A=A, B=B, Sigma=Sigma,
                          poisson=poisson, Q=Q, regime_jump=jump,
                          det_switch=det)

    w = _require(data, "weights", "model")
    M = _weight_list(_require(w, "M", "weights"), "M", N, m)
    D = _weight_list(_require(w, "D", "weights"), "D", N, r)
    weights = CostWeights(M=M, D=D, d_min=float(w.get("d_min", 1e-10)))
    return system, weights


def _weight_list(raw, name, N, n):
    if len(raw) != N:
        raise ModelDimensionError(name, (N,), (len(raw),))
    out = []
    for i, e in enumerate(raw):
        arr = _matrix(e, f"{name}[{i}]", None)
        if arr.ndim == 2:
            if arr.shape != (n, n):
                raise ModelDimensionError(f"{name}[{i}]", (n, n), arr.shape)
            out.append([arr])
        elif arr.ndim == 3:
            if arr.shape[1:] != (n, n):
                raise ModelDimensionError(f"{name}[{i}]", ("K", n, n),
                                          arr.shape)
            out.append(list(arr))
        else:
            raise ModelDimensionError(f"{name}[{i}]", (n, n), arr.shape)
    return out


def load_model(path) -> tuple[RegimeSystem, CostWeights]:
    """Read a JSON model file.

    Parse failures raise :class:`ModelFormatError` with the line and column
    of the problem; shape problems raise :class:`ModelDimensionError`.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return model_from_dict(data)


def permute_regimes(system: RegimeSystem, weights: CostWeights,
                    perm: Sequence[int]) -> tuple[RegimeSystem, CostWeights]:
    """Relabel regimes so that new regime ``a`` is old regime ``perm[a]``."""
    p = list(perm)
    rj = system.regime_jump
    K = [[rj.K[p[a]][p[b]] for b in range(system.N)] for a in range(system.N)]
    new = system.replace(
        A=[system.A[i] for i in p], B=[system.B[i] for i in p],
        Sigma=[system.Sigma[i] for i in p],
        poisson=[system.poisson[i] for i in p],
        Q=system.Q[np.ix_(p, p)],
        regime_jump=RegimeJumpSpec(K=K, Qs=rj.Qs, xi_law=rj.xi_law))
    w = CostWeights(M=[weights.M[i] for i in p], D=[weights.D[i] for i in p],
                    d_min=weights.d_min)
    return new, w
