"""Statistical evidence that the optimal closed loop is stable.

The state is observed at the switch times t = 1, ..., 10 (identity jumps).
We look at the mean of v = x'Gx there, the expected one-interval change of
v from a few states, and the chance that a path started at |x0| = 0.01
ever leaves the unit ball.  The unstable open loop is shown for contrast.
"""

import numpy as np

from jumplq.control import synthesize_feedback
from jumplq.lyapunov import (estimate_discrete_operator,
                             stability_probability_estimate,
                             supermartingale_check)
from jumplq.model import (CostWeights, DeterministicSwitchSpec, RegimeSystem)
from jumplq.riccati import GainSet, solve_coupled_care
from jumplq.simulate import simulate_batch

switches = DeterministicSwitchSpec(times=np.arange(1.0, 11.0), P_H=[[1.0]],
                                   h0=0, J=[np.eye(1)])
system = RegimeSystem.create(A=[[[-1.0]]], B=[[[1.0]]], Sigma=[[[[0.3]]]],
                             det_switch=switches)
weights = CostWeights.create(M=[[[1.0]]], D=[[[1.0]]])
G = solve_coupled_care(system, weights)
F = synthesize_feedback(G, system, weights)

paths = simulate_batch(system, F, [1.0], 0, 10.0, 1e-3, 1000, 5)
rep = supermartingale_check(paths, G, switches)
print("mean v at t_k:", " ".join(f"{v:.2e}" for v in rep.mean))
print(f"non-increasing: {rep.verdict}, strictly: {rep.strictly_decreasing}")

for x in (-1.0, 0.5, 2.0):
    op = estimate_discrete_operator(system, F, G, (0, 0, [x]), 0, 2000, 7)
    print(f"E v_1 - v_0 from x = {x:+.1f}: {op.estimate:.4f} "
          f"+- {op.std_error:.4f}")

est = stability_probability_estimate(system, F, 1.0, 0.01, 20.0, 1e-3, 500,
                                     3, 9)
print(f"\nclosed loop: P(sup|x| > 1) <= {est.upper_bound:.4f} (95%)")

unstable = system.replace(A=[np.array([[1.0]])])
open_paths = simulate_batch(unstable, None, [1.0], 0, 10.0, 1e-3, 500, 5)
rep = supermartingale_check(open_paths, GainSet([[[[1.0]]]]), switches)
print(f"open loop A = +1: non-increasing: {rep.verdict}")
est = stability_probability_estimate(unstable, None, 1.0, 0.5, 10.0, 1e-3,
                                     500, 3, 9)
print(f"open loop: P(sup|x| > 1) ~ {est.max_exceed_prob:.3f}")
