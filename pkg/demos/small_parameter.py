"""Power series in a small parameter versus the direct coupled solve.

Rare switching: the generator is eps * R.  As eps doubles, the error of the
order-2 truncation should grow by about 2^3 = 8.
"""

import warnings

import numpy as np

from jumplq.model import CostWeights, RegimeSystem
from jumplq.perturb import assemble_series, solve_case1
from jumplq.riccati import solve_coupled_care

R = np.array([[-1.0, 1.0], [2.0, -2.0]])


def build(eps):
    system = RegimeSystem.create(
        A=[[[0.0, 1.0], [-1.0, -0.5]], [[-0.5, 0.3], [0.2, -1.0]]],
        B=[[[0.0], [1.0]], [[1.0], [0.5]]], Q=eps * R,
        Sigma=[[0.2 * np.eye(2)], [[[0.1, 0.0], [0.2, 0.1]]]],
        K=[[np.eye(2), [[1.0, 0.2], [0.0, 0.9]]], [np.eye(2), np.eye(2)]])
    return system, CostWeights.create(M=[np.eye(2)] * 2, D=[[[1.0]]] * 2)


print(" eps     R=0        R=1        R=2        R=3")
errors = {}
for eps in (0.01, 0.02, 0.04):
    system, weights = build(eps)
    direct = solve_coupled_care(system, weights).G
    sol = solve_case1(system, weights, R, eps, 3)
    row = []
    for order in range(4):
        trunc = type(sol)(sol.coeffs[:order + 1], eps, order, sol.majorant)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            row.append(np.linalg.norm(assemble_series(trunc).G - direct))
    errors[eps] = row
    print(f"{eps:.2f}  " + "  ".join(f"{e:.3e}" for e in row))

print(f"\nratio at R=2 when eps doubles: "
      f"{errors[0.02][2] / errors[0.01][2]:.2f}")

m = sol.majorant
print(f"majorant: L0 = {m.L0:.3f}, c = {m.c:.3f}, radius = {m.radius:.4f}")
print("L_r  :", " ".join(f"{v:.3f}" for v in m.L))
print("rho_r:", " ".join(f"{v:.3f}" for v in m.rho))
