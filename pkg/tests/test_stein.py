import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mfheisenberg import analytic, stein

C = 0.92


def test_density_fields_and_normaliser():
    d = stein.CriticalDensity(C)
    assert d.a == pytest.approx(3 * C)
    assert d.z == pytest.approx(1 / (27 * C**3), rel=1e-15)
    z, zq = stein.normaliser_check(C)
    assert abs(z - zq) <= 1e-10
    tot = integrate.quad(d.pdf, 0, np.inf, epsabs=1e-14)[0]
    assert tot == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        stein.CriticalDensity(0.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_cdf_matches_quadrature(t):
    d = stein.CriticalDensity(C)
    q = integrate.quad(d.pdf, 0, t, epsabs=1e-14, epsrel=1e-13)[0]
    assert abs(stein.critical_cdf(t, C) - q) <= 1e-10


def test_cdf_edges():
    assert stein.critical_cdf(0.0, C) == 0.0
    assert stein.critical_cdf(-1.0, C) == 0.0
    assert stein.critical_cdf(np.inf, C) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.999999))
def test_quantile_inverts_cdf(q):
    d = stein.CriticalDensity(C)
    assert d.cdf(d.ppf(q)) == pytest.approx(q, abs=1e-12)


def test_operator_on_simple_functions():
    x = np.linspace(0, 3, 7)
    one = stein.stein_operator_apply(lambda s: np.ones_like(s), lambda s: np.zeros_like(s), x, C)
    assert np.allclose(one, 6 * (1 - C * x * x))
    assert abs(stein.stein_operator_apply(lambda s: 1.0, lambda s: 0.0, 1 / math.sqrt(C), C)) < 1e-14
    lin = stein.stein_operator_apply(lambda s: s, lambda s: np.ones_like(s), x, C)
    assert np.allclose(lin, x + 6 * x * (1 - C * x * x))


def test_characterisation_by_sampling():
    rng = np.random.default_rng(0)
    x = stein.CriticalDensity(C).sample(1_000_000, rng)
    for name, (val, se) in stein.stein_discrepancy(x, C).items():
        assert val <= 4 * se, name


def test_discrepancy_detects_exponential():
    rng = np.random.default_rng(1)
    x = rng.exponential(size=100_000)
    val, se = stein.stein_discrepancy(x, C)["x"]
    # E[X + 6X - 6cX^3] = 7 - 36c for a unit exponential
    assert val == pytest.approx(abs(7 - 36 * C), rel=0.05)
    assert val > 10 * se


def test_discrepancy_rejects_empty():
    with pytest.raises(ValueError):
        stein.stein_discrepancy([], C)


def test_constant_h_gives_zero_solution():
    sol = stein.solve_stein_equation(lambda s: 2.0 + 0.0 * s, C)
    assert np.max(np.abs(sol.values)) < 1e-12


def test_solution_at_origin():
    sol = stein.solve_stein_equation(np.sin, C)
    assert sol.values[0] == pytest.approx((math.sin(0) - sol.h_mean) / 6)
    assert np.all(np.isfinite(sol.values))
    assert np.all(np.diff(sol.grid) > 0)
    assert sol.grid[-1] >= 6 / math.sqrt(C)


def test_two_integral_forms_agree():
    sol = stein.solve_stein_equation(np.tanh, C)
    assert abs(sol.at(1.0, "forward") - sol.at(1.0, "tail")) <= 1e-9


def test_residual_for_sine():
    sol = stein.solve_stein_equation(np.sin, C)
    assert sol.residual() <= 1e-8


def test_expectation_matches_sampling():
    e = stein.expectation(np.cos, C)
    x = stein.CriticalDensity(C).sample(200_000, np.random.default_rng(2))
    assert e == pytest.approx(np.cos(x).mean(), abs=4 * np.cos(x).std() / math.sqrt(x.size))


def test_bounds_report():
    rep = stein.verify_solution_bounds(c=C)
    assert rep.passed, rep.failures
    names = {ch.name: ch for ch in rep.checks}
    assert names["const"].sup_f < 1e-12 and names["const"].sup_df < 1e-12
    for key, sup_dh in (("tanh", 1.0), ("cos3", 3.0)):
        ch = names[key]
        assert ch.sup_f <= ch.bound_f and ch.sup_df <= ch.bound_df
        assert ch.bound_df == pytest.approx(42 * math.sqrt(C) + 3 * sup_dh)
        assert ch.bound_df_proof == pytest.approx(42 * math.sqrt(5 * C / 6) + 3 * sup_dh)
    json.dumps(rep.to_dict())


def test_sphere_moments_against_closed_forms():
    q = stein.sphere_conditional_moments(2.0)
    assert q.Z == pytest.approx(math.sinh(2) / 2, rel=1e-12)
    assert q.a_par == pytest.approx((4 - 4 / math.tanh(2) + 2) / 4, abs=1e-10)
    for c in (0.1, 1.0, 10.0):
        assert abs(stein.sphere_conditional_moments(c).mean_coeff - analytic.g(c)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 30.0))
def test_sphere_moments_over_range(c):
    q = stein.sphere_conditional_moments(c)
    ref = stein.langevin_closed_forms(c)
    assert abs(q.Z / ref.Z - 1) <= 1e-10
    assert abs(q.mean_coeff - ref.mean_coeff) <= 1e-10
    assert abs(q.a_par - ref.a_par) <= 1e-10
    assert abs(q.a_perp - ref.a_perp) <= 1e-10
