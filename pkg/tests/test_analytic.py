import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from mfheisenberg import analytic
from mfheisenberg.analytic import Regime

# 40-digit reference values
G_REF = {0.01: 0.0033333111113227492064, 0.5: 0.16395341373865284877,
         1.0: 0.31303528549933130364, 5.0: 0.80009080398201937554,
         30.0: 0.96666666666666666667}
GP_REF = {0.01: 0.33332666677248529102, 0.5: 0.31730562316883072422,
          1.0: 0.27593833903368953359, 5.0: 0.039818383790598098352,
          30.0: 0.0011111111111111111111}
PROFILE_REF = {  # beta: (k2, phi, sigma2, lambda)
    3.5: (1.6383164358479461672, -0.029573638795541889663, 14.32817990970362431,
          0.26688021256271928833),
    5.0: (3.6294099359559978933, -0.32922683792510010787, 0.87452066217867020432,
          0.63452329664322414588),
    10.0: (8.8729837960372355622, -2.0603333919642542168, 0.073921742628928891819,
           0.87298414447393506953),
}


@pytest.mark.parametrize("x", sorted(G_REF))
def test_langevin_reference_values(x):
    assert analytic.g(x) == pytest.approx(G_REF[x], rel=1e-13)
    assert analytic.g_prime(x) == pytest.approx(GP_REF[x], rel=1e-10)


def test_langevin_at_zero_and_series_switch():
    assert analytic.g(0.0) == 0.0
    assert analytic.g_prime(0.0) == pytest.approx(1 / 3)
    s = analytic.SERIES_SWITCH
    for h in (1e-12, 1e-9):
        assert abs(analytic.g(s + h) - analytic.g(s - h)) < 1e-9
        assert abs(analytic.g_prime(s + h) - analytic.g_prime(s - h)) < 1e-9


def test_langevin_large_argument():
    assert analytic.g(1e6) == pytest.approx(1 - 1e-6, rel=1e-14)
    assert analytic.g_prime(1e3) == pytest.approx(1e-6, rel=1e-10)


def test_negative_arguments_rejected():
    with pytest.raises(ValueError):
        analytic.g(-1.0)
    with pytest.raises(ValueError):
        analytic.g_prime(np.array([0.1, -0.1]))


def test_vectorised_shapes():
    x = np.linspace(0, 10, 7)
    assert analytic.g(x).shape == (7,)
    assert isinstance(analytic.g(2.0), float)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 200.0))
def test_langevin_bounds(x):
    gx = analytic.g(x)
    assert 0 < gx < min(1.0, x / 3.0 + 1e-15)
    assert 0 < analytic.g_prime(x) <= 1 / 3


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.999))
def test_g_inverse_round_trip(m):
    k = analytic.g_inverse(m)
    assert analytic.g(k) == pytest.approx(m, rel=1e-12, abs=1e-14)


def test_g_inverse_domain():
    with pytest.raises(ValueError):
        analytic.g_inverse(1.0)
    with pytest.raises(ValueError):
        analytic.g_inverse(-0.1)


@pytest.mark.parametrize("beta", sorted(PROFILE_REF))
def test_profile_reference(beta):
    k, phi, s2, lam = PROFILE_REF[beta]
    p = analytic.profile(beta)
    assert p.regime is Regime.SUPERCRITICAL
    assert p.k2 == pytest.approx(k, rel=1e-12)
    assert p.free_energy == pytest.approx(phi, rel=1e-10)
    assert p.sigma2 == pytest.approx(s2, rel=1e-8)
    assert p.lam == pytest.approx(lam, rel=1e-10)


def test_k2_residual_and_bisection_oracle():
    for b in np.linspace(3.01, 20, 50):
        k = analytic.k2(b)
        assert abs(k - b * analytic.g(k)) <= 1e-12 * max(1, b)
        ref = optimize.brentq(lambda x: x - b * (1 / math.tanh(x) - 1 / x), 1e-6, b, xtol=1e-15)
        assert k == pytest.approx(ref, rel=1e-11)


def test_k2_near_and_far_from_critical():
    # x = beta (x/3 - x^3/45) gives k2 ~ sqrt(15 (beta - 3) / beta)
    eps = 1e-4
    assert analytic.k2(3 + eps) == pytest.approx(math.sqrt(15 * eps / (3 + eps)), rel=1e-3)
    assert analytic.k2(50.0) == pytest.approx(49.0, abs=0.05)


def test_k2_domain():
    with pytest.raises(ValueError):
        analytic.k2(3.0)


def test_regimes():
    assert analytic.regime_of(2.0) is Regime.SUBCRITICAL
    assert analytic.regime_of(3.0) is Regime.CRITICAL
    assert analytic.regime_of(3.5) is Regime.SUPERCRITICAL
    assert analytic.profile(2.0).k2 == 0.0
    assert analytic.profile(2.0).lam == pytest.approx(1 / 3)


def test_free_energy_continuity():
    assert all(analytic.free_energy(b) == 0.0 for b in np.linspace(0, 3, 13))
    f = [abs(analytic.free_energy(3 + e)) for e in (1e-1, 1e-2, 1e-3)]
    d = [abs(analytic.free_energy_derivative(3 + e)) for e in (1e-1, 1e-2, 1e-3)]
    assert f[0] / f[2] >= 5 and d[0] / d[2] >= 5


def test_free_energy_derivative_matches_finite_difference():
    b, h = 6.0, 1e-5
    fd = (analytic.free_energy(b + h) - analytic.free_energy(b - h)) / (2 * h)
    assert analytic.free_energy_derivative(b) == pytest.approx(fd, rel=1e-6)


def test_cramer_rate():
    assert analytic.rate_I_beta(0.0, 0.4) == pytest.approx(0.25284556300418597627, rel=1e-12)
    assert analytic.rate_I_beta(0.0, 0.0) == 0.0


def test_centered_critical_rate():
    ref = {0.2: 0.00073868556672940442092, 0.3: 0.0038668293177495563225,
           0.4: 0.012845563004185976272}
    for x, v in ref.items():
        assert analytic.rate_I_beta(3.0, x, centered=True) == pytest.approx(v, rel=1e-10)


def test_centered_rate_vanishes_at_macrostate():
    b = 5.0
    m = analytic.k2(b) / b
    assert abs(analytic.rate_I_beta(b, m, centered=True)) < 1e-12
    assert analytic.rate_I_beta(b, 0.3, centered=True) > 0


def test_microcanonical_values():
    ref = {-0.01: 0.030182298644131706813, -0.05: 0.15480689776628105918,
           -0.2: 0.69871827053885864489}
    for u, v in ref.items():
        assert analytic.microcanonical_J(u) == pytest.approx(v, rel=1e-11)
    assert analytic.microcanonical_J(0.0) == 0.0
    with pytest.raises(ValueError):
        analytic.microcanonical_J(-0.5)


def test_microcanonical_small_energy_expansion():
    # J(u) = -3u + (9/5) u^2 + O(|u|^3)
    for u in (-1e-3, -3e-3, -1e-2):
        J = analytic.microcanonical_J(u)
        assert abs(J + 3 * u - 1.8 * u * u) <= 3.0 * abs(u) ** 3


def test_macrostate_density_normalised_and_cdf():
    b = 5.0
    tot = integrate.quad(lambda z: analytic.macrostate_longitudinal_density(b, z), -1, 1)[0]
    assert tot == pytest.approx(1.0, abs=1e-12)
    for z in (-0.5, 0.0, 0.7):
        q = integrate.quad(lambda t: analytic.macrostate_longitudinal_density(b, t), -1, z)[0]
        assert analytic.macrostate_longitudinal_cdf(b, z) == pytest.approx(q, abs=1e-12)
    mean = integrate.quad(lambda z: z * analytic.macrostate_longitudinal_density(b, z), -1, 1)[0]
    assert mean == pytest.approx(analytic.k2(b) / b, rel=1e-10)


def test_appendix_inequalities_pass():
    rep = analytic.verify_appendix_inequalities()
    assert rep.passed, rep.failures


def test_rate_query_record():
    q = analytic.rate_query(5.0, 0.5)
    assert q.raw == pytest.approx(analytic.rate_I_beta(5.0, 0.5))
    assert q.centered == pytest.approx(q.raw - analytic.free_energy(5.0))
    assert analytic.g(q.c) == pytest.approx(0.5)
