"""
Stein's method for the critical law
===================================

The density p(t) = t^5 exp(-3 c t^2) / z is characterised by
T f(x) = x f'(x) + 6 (1 - c x^2) f(x): E[T f(X)] = 0 exactly when X ~ p.
"""

# %%
import numpy as np

from mfheisenberg import stein

c = 0.92
dens = stein.CriticalDensity(c)
print("z closed form vs quadrature:", stein.normaliser_check(c))
x = dens.sample(10 ** 6, np.random.default_rng(0))
print("discrepancies under the law itself:", stein.stein_discrepancy(x, c))
y = np.random.default_rng(1).exponential(size=10 ** 6)
print("discrepancies under Exp(1):", stein.stein_discrepancy(y, c))

# %% Solving T f = h - E h(X) and checking the sup-norm bounds
sol = stein.solve_stein_equation(np.sin, c)
print("E sin(X) =", sol.h_mean, " f(0) =", sol.values[0], " residual =", sol.residual())
for ch in stein.verify_solution_bounds(c=c).checks:
    print(f"{ch.name:9s} |f|={ch.sup_f:.4f} <= {ch.bound_f:.1f}   |f'|={ch.sup_df:.4f} <= {ch.bound_df:.2f}")

# %% Moments of the conditional spin law by quadrature
for cc in (0.1, 2.0, 30.0):
    print(cc, stein.sphere_conditional_moments(cc))
