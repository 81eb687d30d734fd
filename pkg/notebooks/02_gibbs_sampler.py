"""
Gibbs sampler and the two Gaussian limits
=========================================

Each update redraws one spin from its conditional law, a von Mises-Fisher
density with concentration beta |S - sigma_i| / n.  Away from beta = 3 the
rescaled total spin is asymptotically Gaussian.
"""

# %%
import numpy as np

from mfheisenberg import analytic, limits, sampler, stats

n = 1000
params = sampler.chain_params(n, 2.0, sweeps=2200, chains=4, seed=1, burnin=200)
series = sampler.run_chains(params)
W = np.concatenate([limits.observable_subcritical(s.S, n, 2.0) for s in series])
print("beta=2: E|W|^2 =", (W ** 2).sum(axis=1).mean(), "(limit 3)")
for j, axis in enumerate("xyz"):
    print(f"  KS of W_{axis} vs N(0,1):", stats.ks_distance(W[:, j], stats.normal_cdf).value)
print("  ESS of W_x in chain 0:", stats.effective_sample_size(limits.observable_subcritical(series[0].S, n, 2.0)[:, 0]))

# %% Above the transition the length of S concentrates at n k2 / beta
params = sampler.chain_params(n, 5.0, sweeps=2300, chains=4, seed=2, burnin=300)
series = sampler.run_chains(params)
W = np.concatenate([limits.observable_supercritical(s.S, n, 5.0) for s in series])
print("beta=5: mean |S|/n =", np.mean([s.magnetization.mean() for s in series]),
      " k2/beta =", analytic.k2(5.0) / 5.0)
print("  Var W =", W.var(ddof=1), " sigma^2(5) =", analytic.sigma2_supercritical(5.0))

# %% The exchangeable pair: drift of W under one Gibbs step is linear in W
snaps = sampler.collect_snapshots(n, 5.0, 100, 5, 300, seed=3)
diag = limits.pair_diagnostics(snaps, 5.0, 1000, sampler.make_rng(4), exact=True)
print("fitted drift rate", diag.lambda_hat, " theory", diag.lambda_theory)

# %% Each spin's cosine to the direction of S follows k2 e^{k2 z} / (2 sinh k2)
z = np.concatenate([s.spins @ (s.total / np.linalg.norm(s.total)) for s in snaps])
print("KS of cosines:", stats.ks_distance(z, lambda t: analytic.macrostate_longitudinal_cdf(5.0, t)).value)
