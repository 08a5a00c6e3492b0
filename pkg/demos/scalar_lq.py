"""Scalar LQ problem with multiplicative noise.

dx = (-x + u) dt + 0.3 x dw,  cost = E int (x^2 + u^2) dt.

Solves for the value matrix, builds the optimal feedback, then checks by
simulation that the expected cost from x0 = 1 equals the value x0' G x0.
"""

import numpy as np

from jumplq.control import closed_loop, synthesize_feedback
from jumplq.cost import estimate_cost
from jumplq.model import CostWeights, RegimeSystem
from jumplq.riccati import solve_coupled_care
from jumplq.simulate import FeedbackLaw

system = RegimeSystem.create(A=[[[-1.0]]], B=[[[1.0]]], Sigma=[[[[0.3]]]])
weights = CostWeights.create(M=[[[1.0]]], D=[[[1.0]]])

G = solve_coupled_care(system, weights)
F = synthesize_feedback(G, system, weights)
g = G.at(0)[0, 0]
print(f"G = {g:.8f}   (noise-free value would be sqrt(2) - 1 = "
      f"{np.sqrt(2) - 1:.8f})")
print(f"F = {F.gain(0)[0, 0]:.8f},  closed-loop drift "
      f"{closed_loop(system, F).A[0][0, 0]:.8f}")

# Monte Carlo: 2000 paths is enough to see agreement at the 1% level
est = estimate_cost(system, weights, F, [1.0], 0, T=15.0, dt=1e-3,
                    n_paths=2000, root_seed=1)
print(f"\nsimulated cost  {est.mean:.5f} +- {est.std_error:.5f}")
print(f"predicted value {g:.5f}")
print(f"truncation tail ~ {est.tail_estimate:.1e}")

# any other gain should do worse
for delta in (-0.2, 0.2):
    other = FeedbackLaw(F.F + delta)
    e = estimate_cost(system, weights, other, [1.0], 0, 15.0, 1e-3, 2000, 1)
    print(f"gain F{delta:+.1f}: cost {e.mean:.5f}")
