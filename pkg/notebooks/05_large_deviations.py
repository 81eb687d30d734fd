"""
Large deviations of the magnetization
=====================================

P[|M_n| >= x] decays like exp(-n I(x)).  The probabilities are far too
small for direct sampling, so they are estimated by importance sampling
from i.i.d. spins tilted towards a fixed axis and reweighted exactly.
"""

# %%
from mfheisenberg import analytic, sampler, stats

fit = stats.tail_rate_fit(0.0, 0.4, [50, 100, 200, 400], 50_000, rng=0)
for n, r in zip(fit.n_grid, fit.empirical_rates):
    print(f"n={n:4d}  -(1/n) log P = {r:.5f}")
print("extrapolated", fit.extrapolated_rate, " exact", fit.theory_rate)

# %% At beta = 3 the rate is quartic near zero rather than quadratic
for x in (0.1, 0.2, 0.4):
    print(x, analytic.rate_I_beta(3.0, x, centered=True), analytic.rate_I_beta(2.0, x, centered=True))

# %% Microcanonical entropy and rejection sampling in an energy window
for u in (-0.01, -0.05, -0.2):
    print(f"J({u}) = {analytic.microcanonical_J(u):.6f}   -3u + 1.8u^2 = {-3 * u + 1.8 * u * u:.6f}")
rng = sampler.make_rng(0)
for n in (10, 20, 30):
    print(n, sampler.acceptance_rate(n, -0.05, 0.01, 100_000, rng))
