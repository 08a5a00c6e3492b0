"""Two regimes coupled by a Markov chain, with state jumps at transitions.

Regime 0 is a lightly damped oscillator actuated through its velocity;
regime 1 is a stable node actuated through both states.  Transitions
0 -> 1 shear the state, and a random component of size 0.1 is added at
every transition.  Both regimes also see a Poisson shock of rate 0.5.
"""

import numpy as np

from jumplq.control import synthesize_feedback
from jumplq.cost import estimate_cost
from jumplq.model import CostWeights, RegimeSystem, validate
from jumplq.riccati import care_residual, solve_coupled_care
from jumplq.simulate import simulate_path
from jumplq.stochastic import SeededStream

system = RegimeSystem.create(
    A=[[[0.0, 1.0], [-1.0, -0.5]], [[-0.5, 0.3], [0.2, -1.0]]],
    B=[[[0.0], [1.0]], [[1.0], [0.5]]],
    Q=[[-1.0, 1.0], [2.0, -2.0]],
    Sigma=[[0.2 * np.eye(2)], [[[0.1, 0.0], [0.2, 0.1]]]],
    poisson=[[(0.5, [[0.1, 0.0], [0.0, -0.2]])],
             [(0.5, [[0.0, 0.1], [0.1, 0.0]])]],
    K=[[np.eye(2), [[1.0, 0.2], [0.0, 0.9]]], [np.eye(2), np.eye(2)]],
    Qs=[0.1 * np.diag([1.0, -1.0])])
weights = CostWeights.create(M=[np.eye(2)] * 2, D=[[[1.0]]] * 2)

print(validate(system, weights))

G = solve_coupled_care(system, weights)
res = np.linalg.norm(care_residual(system, weights, G), axis=(2, 3))
print("\nresidual norms:", res.ravel())
for i in range(2):
    print(f"G[{i}] =\n{G.at(i)}")

F = synthesize_feedback(G, system, weights)
for i in range(2):
    print(f"F[{i}] = {F.gain(i)}")

# one path, to see the three kinds of events
path = simulate_path(system, F, [1.0, 0.5], 0, 5.0, 1e-2, SeededStream(3))
kinds = [kind for _, kind, _ in path.events]
print(f"\none path: {kinds.count('regime_jump')} regime jumps, "
      f"{kinds.count('poisson')} Poisson shocks, |x(5)| = "
      f"{np.linalg.norm(path.x[-1]):.3e}")

x0 = np.array([1.0, 0.5])
est = estimate_cost(system, weights, F, x0, 0, 15.0, 2e-3, 1000, 8)
print(f"\ncost from x0 in regime 0: {est.mean:.4f} +- {est.std_error:.4f}")
print(f"value x0' G_0 x0:         {x0 @ G.at(0) @ x0:.4f}")
