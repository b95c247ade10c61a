"""Tayloring as an analytical bridge to heavy traffic.

For the uncontrolled queue with reward r(x) = x, the Taylored equation has
an explicit solution.  Coupling the discount to the utilization through
alpha = 1 - (1 - rho)^2 and comparing against the exact chain value shows
the gap shrinking relative to the value as rho -> 1, without any process
limit: |V - Vhat| <= Gamma_hat (1 - rho) V at x = ceil(1/(1 - rho)).
"""

import math

import numpy as np

import taylordp as tdp
from taylordp.models import build
from taylordp.models.heavy_traffic import heavy_traffic_oracle

print("rho   alpha    x    V(x) exact    Vhat(x)      Gamma_hat")
for rho in (0.6, 0.7, 0.8, 0.9):
    lam = rho / (1.0 + rho)
    alpha = 1.0 - (1.0 - rho) ** 2
    M = max(200, int(20 / (1.0 - rho)))
    model = build("heavy_traffic", lam=lam, alpha=alpha, M=M)
    v = tdp.policy_evaluation(model.mdp, np.zeros(model.mdp.n_states, dtype=np.int64))
    x = math.ceil(1.0 / (1.0 - rho))
    v_hat = heavy_traffic_oracle(lam, alpha, x)
    gamma_hat = abs(v[x] - v_hat) / ((1.0 - rho) * v[x])
    print(f"{rho:.1f}  {alpha:.4f}  {x:3d}  {v[x]:11.2f}  {v_hat:11.2f}   {gamma_hat:8.3f}")

print("\nthe same closed form also supplies derivative bounds: |V'''| <= gamma^2/(1-alpha)")
fn = build("heavy_traffic", lam=0.4, alpha=0.99, M=100).oracle()
xs = np.arange(0.0, 40.0, 5.0)
print("x:      ", xs.astype(int).tolist())
print("V'''(x):", [round(float(t), 4) for t in fn.third(xs)])
