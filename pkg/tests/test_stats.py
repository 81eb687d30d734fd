import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from mfheisenberg import analytic, stats


def test_reference_cdfs():
    assert stats.chi2_3_cdf(3.0) == pytest.approx(sps.chi2(3).cdf(3.0), abs=1e-12)
    assert stats.normal_cdf(1.0) == pytest.approx(sps.norm.cdf(1.0), abs=1e-12)
    assert stats.chi2_3_cdf(-1.0) == 0.0


def test_ks_null():
    x = np.random.default_rng(0).normal(size=10_000)
    rep = stats.ks_distance(x, stats.normal_cdf, "N(0,1)")
    assert rep.value <= 1.36 / math.sqrt(10_000)
    lo, hi = rep.bootstrap_ci
    assert lo <= rep.value <= hi
    assert rep.n_samples == 10_000 and rep.metric is stats.Metric.KS


def test_ks_point_mass():
    rep = stats.ks_distance(np.zeros(200), stats.normal_cdf)
    assert rep.value >= 0.5


def test_ks_matches_scipy():
    x = np.random.default_rng(1).exponential(size=500)
    assert stats.ks_distance(x, stats.normal_cdf).value == pytest.approx(
        sps.kstest(x, "norm").statistic, abs=1e-12)


def test_input_validation():
    with pytest.raises(ValueError):
        stats.ks_distance([], stats.normal_cdf)
    with pytest.raises(ValueError):
        stats.wasserstein1_empirical(np.ones(10), stats.normal_ppf)


def test_two_sample_ks_symmetric():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=300), rng.normal(0.2, size=400)
    assert stats.ks_two_sample(a, b) == stats.ks_two_sample(b, a)
    assert stats.ks_two_sample(a, b) == pytest.approx(sps.ks_2samp(a, b).statistic)
    assert stats.ks_two_sample(a, a) == 0.0


def test_w1_own_quantiles():
    N = 1000
    q = stats.normal_ppf((np.arange(N) + 0.5) / N)
    assert stats.wasserstein1_empirical(q, stats.normal_ppf).value == 0.0


def test_w1_null_scale():
    x = np.random.default_rng(3).normal(size=10_000)
    rep = stats.wasserstein1_empirical(x, stats.normal_ppf, "N(0,1)")
    assert rep.value < 0.03
    assert rep.bootstrap_ci[0] <= rep.value <= rep.bootstrap_ci[1]
    json.dumps(rep.to_dict())


def test_w1_detects_shift():
    x = np.random.default_rng(4).normal(0.5, size=5000)
    assert stats.wasserstein1_empirical(x, stats.normal_ppf).value == pytest.approx(0.5, abs=0.05)


def test_ess_iid():
    x = np.random.default_rng(5).normal(size=20_000)
    assert 0.8 <= stats.effective_sample_size(x) / x.size <= 1.2


def test_ess_alternating():
    x = np.tile([1.0, -1.0], 500)
    assert stats.effective_sample_size(x) >= x.size


def test_ess_ar1():
    rng = np.random.default_rng(6)
    N, phi = 200_000, 0.9
    e = rng.normal(size=N)
    x = np.empty(N)
    x[0] = e[0]
    for i in range(1, N):
        x[i] = phi * x[i - 1] + e[i]
    ratio = stats.effective_sample_size(x) / N
    assert ratio == pytest.approx((1 - phi) / (1 + phi), rel=0.3)


def test_ess_constant_and_short():
    assert stats.effective_sample_size(np.ones(200)) == 200
    with pytest.raises(ValueError):
        stats.effective_sample_size(np.arange(50.0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ess_positive_and_bounded(seed):
    x = np.random.default_rng(seed).normal(size=300).cumsum()
    ess = stats.effective_sample_size(x)
    assert 0 < ess <= x.size


def test_tail_rate_refuses_minimiser():
    with pytest.raises(ValueError):
        stats.tail_rate_fit(0.0, 0.0)
    with pytest.raises(ValueError):
        stats.tail_rate_fit(0.0, 0.4, replicates=100)


def test_tail_probability_against_plain_sampling():
    # moderate deviation where direct sampling still sees exceedances
    n, x, reps = 20, 0.4, 200_000
    rng = np.random.default_rng(7)
    from mfheisenberg import sampler
    hits = 0
    for _ in range(reps // 20_000):
        S = sampler.uniform_spins((20_000, n), rng).sum(axis=1)
        hits += np.count_nonzero(np.linalg.norm(S, axis=1) / n >= x)
    p_mc = hits / reps
    lp, rel = stats._log_tail_probability(0.0, x, n, 50_000, np.random.default_rng(8))
    se_mc = math.sqrt(p_mc * (1 - p_mc) / reps)
    assert math.exp(lp) == pytest.approx(p_mc, abs=4 * se_mc + 4 * rel * math.exp(lp))


def test_tail_probability_gibbs_reweighting():
    # beta = 1, n = 20: compare with the chain estimate of P[|M| >= x]
    from mfheisenberg import sampler
    n, x, beta = 20, 0.5, 1.0
    lp, rel = stats._log_tail_probability(beta, x, n, 50_000, np.random.default_rng(9))
    ser = sampler.run_chain(sampler.ChainParams(n, beta, 200_500, 500, 1, 3, 0))
    ind = (ser.magnetization >= x).astype(float)
    se = ind.std() / math.sqrt(stats.effective_sample_size(ind))
    assert math.exp(lp) == pytest.approx(ind.mean(), abs=4 * se + 4 * rel * math.exp(lp))


def test_tail_rate_fit_beta0(tmp_path):
    fit = stats.tail_rate_fit(0.0, 0.4, [50, 100, 200, 400], 20_000, 1)
    assert fit.theory_rate == pytest.approx(0.25284556300418597627, rel=1e-12)
    assert fit.relative_error <= 0.15
    assert np.all(np.diff(fit.empirical_rates) > 0)
    fit.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "n,rate_hat,se"
    fit.to_json(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["x_norm"] == 0.4


def test_tail_rate_increasing_in_x():
    r = [stats.tail_rate_fit(0.0, x, [50, 100], 10_000, 2).empirical_rates for x in (0.2, 0.3, 0.4)]
    for j in range(2):
        assert r[0][j] < r[1][j] < r[2][j]


def test_tail_rate_drops_empty_n(monkeypatch):
    orig = stats._log_tail_probability

    def fake(beta, x, n, reps, rng):
        return (-math.inf, math.inf) if n == 100 else orig(beta, x, n, reps, rng)

    monkeypatch.setattr(stats, "_log_tail_probability", fake)
    with pytest.warns(RuntimeWarning, match="dropped"):
        fit = stats.tail_rate_fit(0.0, 0.4, [50, 100], 10_000, 3)
    assert fit.dropped == [100] and fit.n_grid == [50]
    with pytest.raises(RuntimeError), pytest.warns(RuntimeWarning):
        stats.tail_rate_fit(0.0, 0.4, [100], 10_000, 3)


def test_loglog_slope():
    x = np.array([1.0, 2.0, 4.0])
    assert stats.loglog_slope(x, 3 * x**4) == pytest.approx(4.0)
    assert stats.loglog_slope([0.2, 0.3, 0.4], [analytic.rate_I_beta(3.0, v, True)
                                                for v in (0.2, 0.3, 0.4)]) == pytest.approx(4.118, abs=0.01)
