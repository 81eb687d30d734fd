"""
Phase diagram of the mean-field Heisenberg model
================================================

The order parameter k2(beta) solves x = beta g(x) with g(x) = coth x - 1/x.
Below beta = 3 only x = 0 solves it and the free energy is flat; above,
a nonzero root appears continuously.
"""

# %%
import numpy as np

from mfheisenberg import analytic

for beta in (1.0, 2.0, 3.0, 3.5, 5.0, 10.0):
    p = analytic.profile(beta)
    print(f"beta={beta:5.2f}  {p.regime.value:13s}  k2={p.k2:8.5f}  "
          f"|M|={p.k2 / beta:7.5f}  phi={p.free_energy:9.5f}  lambda={p.lam:7.5f}")

# %% Near the transition k2 grows like sqrt(15 (beta - 3) / beta)
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    b = 3 + eps
    print(f"eps={eps:7.0e}  k2={analytic.k2(b):.6e}  sqrt(15 eps / beta)={np.sqrt(15 * eps / b):.6e}")

# %% The free energy and its derivative both vanish continuously at beta = 3
for eps in (1e-1, 1e-2, 1e-3):
    print(f"eps={eps:7.0e}  phi={analytic.free_energy(3 + eps):.3e}  "
          f"phi'={analytic.free_energy_derivative(3 + eps):.3e}")

# %% Calculus facts used to locate the phase transition, checked on grids
print(analytic.verify_appendix_inequalities())
