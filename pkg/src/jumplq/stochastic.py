"""Seeded random streams and samplers for the driving processes.

Streams are split with numpy's ``SeedSequence``: the draws for path ``p`` of a
run seeded with ``root_seed`` come from ``SeedSequence(root_seed,
spawn_key=(p, source))``, where ``source`` identifies the driving process
(regime chain, Wiener increments, Poisson counts, ...).  The spawn key is
hashed into the generator state, so streams with different ids are
independent and a path's draws do not depend on which worker simulates it or
on how many other paths are simulated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

# sub-stream codes; kept stable because they define the random sequence
SOURCES = {"ctmc": 0, "wiener": 1, "poisson": 2, "xi": 3, "eta": 4,
           "x0": 5, "aux": 6}


@dataclass(frozen=True)
class SeededStream:
    """Immutable handle on a reproducible random stream.

    Every call to :meth:`generator` starts the stream afresh, so sampling
    twice with the same handle gives identical output.
    """

    root_seed: int
    stream_id: int = 0
    source: int | None = None

    def __post_init__(self):
        for name in ("root_seed", "stream_id"):
            val = getattr(self, name)
            if not 0 <= int(val) < 2**64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer")

    def child(self, source: str) -> "SeededStream":
        return SeededStream(self.root_seed, self.stream_id, SOURCES[source])

    def seed_sequence(self) -> np.random.SeedSequence:
        key = (int(self.stream_id),)
        if self.source is not None:
            key = key + (int(self.source),)
        return np.random.SeedSequence(int(self.root_seed), spawn_key=key)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


RandomSource = Union[SeededStream, np.random.Generator]


def as_generator(stream: RandomSource) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return stream.generator()


@dataclass(frozen=True)
class RegimePath:
    """Piecewise-constant path of the regime chain on ``[0, T]``.

    ``states[n]`` is the regime on ``[times[n-1], times[n])`` with
    ``times[-1] := 0``; i.e. ``states[0] == y0`` and ``states[n]`` for
    ``n >= 1`` is entered at ``times[n-1]``.
    """

    y0: int
    T: float
    times: np.ndarray
    states: np.ndarray

    def regime_at(self, t: float) -> int:
        n = int(np.searchsorted(self.times, t, side="right"))
        return int(self.states[n])

    @property
    def n_jumps(self) -> int:
        return len(self.times)


def sample_ctmc(Q, y0: int, T: float, stream: RandomSource) -> RegimePath:
    """Exact path of a finite continuous-time Markov chain.

    Holding times in state ``i`` are exponential with rate ``-Q[i, i]``;
    the next state is ``j`` with probability ``Q[i, j] / -Q[i, i]``.
    States with zero exit rate are absorbing.
    """
    Q = np.asarray(Q, dtype=float)
    if T <= 0:
        raise ValueError("T must be positive")
    rng = as_generator(stream)
    N = Q.shape[0]
    times, states = [], [int(y0)]
    t, y = 0.0, int(y0)
    while True:
        rate = -Q[y, y]
        if rate <= 0:
            break
        t += rng.exponential(1.0 / rate)
        if t > T:
            break
        probs = np.clip(Q[y], 0.0, None)
        probs[y] = 0.0
        y = int(rng.choice(N, p=probs / probs.sum()))
        times.append(t)
        states.append(y)
    return RegimePath(int(y0), float(T), np.array(times, dtype=float),
                      np.array(states, dtype=np.int64))


def step_eta(P_H, h: int, stream: RandomSource) -> int:
    """One transition of the discrete switching chain from state ``h``."""
    row = np.asarray(P_H, dtype=float)[h]
    rng = as_generator(stream)
    # inverse-cdf on one uniform so that degenerate rows consume a draw too
    u = rng.random()
    cdf = np.cumsum(row)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    idx = min(idx, len(row) - 1)
    while row[idx] == 0.0:
        idx -= 1
    return idx


def sample_xi(law: str, count: int, stream: RandomSource) -> np.ndarray:
    """I.i.d. zero-mean, unit-variance jump coefficients."""
    rng = as_generator(stream)
    if law == "rademacher":
        return 2.0 * rng.integers(0, 2, size=count) - 1.0
    if law == "standard_normal":
        return rng.standard_normal(count)
    raise ValueError(f"unknown xi law {law!r}")
