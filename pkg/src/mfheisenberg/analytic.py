"""Closed-form ground truth for the mean-field Heisenberg model.

Everything here is a pure function of its arguments.  The central special
function is the Langevin function ``g(x) = coth(x) - 1/x``, the mean cosine of
a unit vector on the sphere under an exponential tilt of concentration ``x``.
The free energy, order parameter, rate functions and CLT constants are all
built from ``g`` and ``log(sinh(x)/x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

BETA_CRITICAL = 3.0
SERIES_SWITCH = 0.05
LARGE_X = 20.0


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


def regime_of(beta: float) -> Regime:
    if beta < BETA_CRITICAL:
        return Regime.SUBCRITICAL
    if beta == BETA_CRITICAL:
        return Regime.CRITICAL
    return Regime.SUPERCRITICAL


def _check_nonneg(x: np.ndarray, name: str) -> None:
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise ValueError(f"{name} must be nonnegative")


def _scalar_or_array(x: np.ndarray, like):
    return float(x) if np.ndim(like) == 0 else x


def g(x):
    """Langevin function coth(x) - 1/x, with g(0) = 0.

    Uses the odd Taylor series below ``SERIES_SWITCH`` where the direct
    formula cancels catastrophically.
    """
    xa = np.asarray(x, dtype=float)
    _check_nonneg(xa, "x")
    small = xa < SERIES_SWITCH
    xs = np.where(small, xa, 0.0)
    x2 = xs * xs
    series = xs * (1.0 / 3.0 - x2 * (1.0 / 45.0 - x2 * (2.0 / 945.0 - x2 / 4725.0)))
    xd = np.where(small, 1.0, xa)
    direct = 1.0 / np.tanh(xd) - 1.0 / xd
    return _scalar_or_array(np.where(small, series, direct), x)


def _inv_sinh_sq(x: np.ndarray) -> np.ndarray:
    # 1/sinh(x)^2 without overflow for large x
    big = x > LARGE_X
    xs = np.where(big, 1.0, x)
    xb = np.where(big, x, LARGE_X)
    eb = np.exp(-xb)
    return np.where(big, (2.0 * eb / (1.0 - eb * eb)) ** 2, 1.0 / np.sinh(xs) ** 2)


def g_prime(x):
    """Derivative 1/x^2 - 1/sinh(x)^2 of the Langevin function; g'(0) = 1/3."""
    xa = np.asarray(x, dtype=float)
    _check_nonneg(xa, "x")
    small = xa < SERIES_SWITCH
    xs = np.where(small, xa, 0.0)
    x2 = xs * xs
    series = 1.0 / 3.0 - x2 * (1.0 / 15.0 - x2 * (2.0 / 189.0 - x2 / 675.0))
    xd = np.where(small, 1.0, xa)
    direct = 1.0 / (xd * xd) - _inv_sinh_sq(xd)
    return _scalar_or_array(np.where(small, series, direct), x)


def log_sinhc(x):
    """log(sinh(x)/x), stable at 0 and for large x."""
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    small = ax < SERIES_SWITCH
    big = ax > LARGE_X
    xs = np.where(small, ax, 0.0)
    x2 = xs * xs
    series = x2 * (1.0 / 6.0 - x2 * (1.0 / 180.0 - x2 / 2835.0))
    xm = np.where(small | big, 1.0, ax)
    mid = np.log(np.sinh(xm) / xm)
    xb = np.where(big, ax, LARGE_X)
    large = xb - math.log(2.0) + np.log1p(-np.exp(-2.0 * xb)) - np.log(xb)
    out = np.where(small, series, np.where(big, large, mid))
    return _scalar_or_array(out, x)


def _solve_increasing(f, fprime, lo: float, hi: float, tol: float) -> float:
    """Bisection down to relative width 1e-6, then safeguarded Newton polish."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(50):
        fx = f(x)
        if abs(fx) <= tol:
            break
        d = fprime(x)
        step = fx / d if d != 0.0 else 0.0
        xn = x - step
        if not (lo <= xn <= hi) or d == 0.0:
            xn = 0.5 * (lo + hi)
        if (fx < 0.0) == (flo < 0.0):
            lo = x
        else:
            hi = x
        if xn == x:
            break
        x = xn
    return x


def _g_inverse_scalar(m: float) -> float:
    if not (0.0 <= m < 1.0):
        raise ValueError(f"g_inverse needs 0 <= m < 1, got {m}")
    if m == 0.0:
        return 0.0
    # g(c) < c/3 and g(c) > 1 - 1/c bracket the root in [3m, 1/(1-m)]
    lo, hi = 3.0 * m, 1.0 / (1.0 - m)
    return _solve_increasing(lambda c: g(c) - m, g_prime, lo, hi, 1e-14 * min(1.0, 10.0 * m))


def g_inverse(m):
    """Unique c >= 0 with g(c) = m, for 0 <= m < 1."""
    ma = np.asarray(m, dtype=float)
    if ma.ndim == 0:
        return _g_inverse_scalar(float(ma))
    return np.array([_g_inverse_scalar(float(v)) for v in ma.ravel()]).reshape(ma.shape)


def k2(beta: float) -> float:
    """Order parameter: the positive root of x = beta * g(x), for beta > 3."""
    if not beta > BETA_CRITICAL:
        raise ValueError(f"k2 is defined only for beta > 3, got {beta}")
    tol = 1e-13 * max(1.0, beta)
    return _solve_increasing(
        lambda x: x - beta * g(x),
        lambda x: 1.0 - beta * g_prime(x),
        1e-8,
        float(beta),
        tol,
    )


def phi_of_k(beta: float, k):
    """Phi_beta(k) = log(k/sinh k) + k coth k - 1 - (beta/2) g(k)^2."""
    ka = np.asarray(k, dtype=float)
    _check_nonneg(ka, "k")
    gk = np.asarray(g(ka))
    out = -np.asarray(log_sinhc(ka)) + ka * gk - 0.5 * beta * gk * gk
    return _scalar_or_array(out, k)


def phi_prime(beta: float, k):
    """d/dk Phi_beta(k) = g'(k) (k - beta g(k))."""
    return g_prime(k) * (np.asarray(k) - beta * np.asarray(g(k)))


def free_energy(beta: float) -> float:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if beta <= BETA_CRITICAL:
        return 0.0
    return float(phi_of_k(beta, k2(beta)))


def free_energy_derivative(beta: float) -> float:
    """phi'(beta) = -g(k2)^2 / 2 by the envelope theorem (0 for beta <= 3)."""
    if beta <= BETA_CRITICAL:
        return 0.0
    return -0.5 * g(k2(beta)) ** 2


def rate_I_beta(beta: float, x_norm, centered: bool = False):
    """Spin rate function Phi_beta(g^{-1}(|x|)).

    The raw value is returned by default; ``centered=True`` subtracts the free
    energy so the result is >= 0 and vanishes on the macrostate set.
    """
    xa = np.asarray(x_norm, dtype=float)
    if np.any(xa < 0) or np.any(xa >= 1):
        raise ValueError("x_norm must lie in [0, 1)")
    raw = phi_of_k(beta, g_inverse(xa))
    if centered:
        raw = raw - free_energy(beta)
    return _scalar_or_array(np.asarray(raw), x_norm)


@dataclass(frozen=True)
class RateFunctionQuery:
    beta: float
    x_norm: float
    c: float
    raw: float
    centered: float


def rate_query(beta: float, x_norm: float) -> RateFunctionQuery:
    c = g_inverse(x_norm)
    raw = float(phi_of_k(beta, c))
    return RateFunctionQuery(beta, float(x_norm), c, raw, raw - free_energy(beta))


def pair_lambda(beta: float) -> float:
    """Drift rate of the Gibbs-sampler pair, before the 1/n factor."""
    if beta < BETA_CRITICAL:
        return 1.0 - beta / 3.0
    if beta == BETA_CRITICAL:
        return 0.0
    return 1.0 - beta * g_prime(k2(beta))


def sigma2_supercritical(beta: float) -> float:
    """Limiting variance of the recentred squared-length observable."""
    if not beta > BETA_CRITICAL:
        raise ValueError(f"sigma2 is defined only for beta > 3, got {beta}")
    k = k2(beta)
    gp = g_prime(k)
    return 4.0 * beta**2 * gp / ((1.0 - beta * gp) * k * k)


@dataclass(frozen=True)
class AnalyticProfile:
    beta: float
    regime: Regime
    k2: float
    free_energy: float
    sigma2: float | None
    lam: float


def profile(beta: float) -> AnalyticProfile:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    reg = regime_of(beta)
    if reg is Regime.SUPERCRITICAL:
        k = k2(beta)
        return AnalyticProfile(beta, reg, k, free_energy(beta),
                               sigma2_supercritical(beta), pair_lambda(beta))
    return AnalyticProfile(beta, reg, 0.0, 0.0, None, pair_lambda(beta))


@dataclass(frozen=True)
class MicrocanonicalQuery:
    u: float
    k2u: float
    J: float


def microcanonical(u: float) -> MicrocanonicalQuery:
    if not (-0.5 < u <= 0.0):
        raise ValueError(f"energy per particle must lie in (-1/2, 0], got {u}")
    m = math.sqrt(-2.0 * u)
    k = g_inverse(m)
    J = -float(log_sinhc(k)) + k * m
    return MicrocanonicalQuery(u, k, max(J, 0.0))


def microcanonical_J(u: float) -> float:
    """Microcanonical entropy J(u) on the domain (-1/2, 0]."""
    return microcanonical(u).J


def macrostate_longitudinal_density(beta: float, z):
    """Density k2 e^{k2 z} / (2 sinh k2) of a spin's cosine to the macrostate pole."""
    za = np.asarray(z, dtype=float)
    if np.any(za < -1) or np.any(za > 1):
        raise ValueError("z must lie in [-1, 1]")
    k = k2(beta)
    out = k * np.exp(k * (za - 1.0)) / (1.0 - math.exp(-2.0 * k))
    return _scalar_or_array(out, z)


def macrostate_longitudinal_cdf(beta: float, z):
    za = np.clip(np.asarray(z, dtype=float), -1.0, 1.0)
    k = k2(beta)
    # (e^{kz} - e^{-k}) / (e^k - e^{-k}), scaled by e^{-k}
    out = np.exp(k * (za - 1.0)) * -np.expm1(-k * (za + 1.0)) / -math.expm1(-2.0 * k)
    return _scalar_or_array(out, z)


@dataclass
class AppendixReport:
    langevin_below_tangent: bool
    ratio_increasing: bool
    curvature_margin: bool
    phi_second_derivative_positive: bool
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.langevin_below_tangent and self.ratio_increasing
                and self.curvature_margin and self.phi_second_derivative_positive)


def verify_appendix_inequalities(x_grid=None, beta_grid=None) -> AppendixReport:
    """Check the four calculus facts behind the phase diagram on grids.

    (i) g(x) < x/3; (ii) x/g(x) strictly increasing; (iii) beta g'(k2) < 1;
    (iv) finite-difference Phi_beta''(k2) > 0.
    """
    xs = np.geomspace(1e-3, 50.0, 1000) if x_grid is None else np.asarray(x_grid, float)
    betas = np.linspace(3.01, 20.0, 100) if beta_grid is None else np.asarray(beta_grid, float)
    failures: list[str] = []

    gx = np.asarray(g(xs))
    bad = xs[~(gx < xs / 3.0)]
    failures += [f"g(x) >= x/3 at x={v:.6g}" for v in bad]

    ratio = xs / gx
    steps = np.diff(ratio)
    bad_idx = np.nonzero(~(steps > 0))[0]
    failures += [f"x/g(x) not increasing at x={xs[i]:.6g}" for i in bad_idx]

    margin_ok = True
    curv_ok = True
    for b in betas:
        k = k2(b)
        if not b * g_prime(k) < 1.0:
            margin_ok = False
            failures.append(f"beta g'(k2) >= 1 at beta={b:.6g}")
        h = 1e-3 * max(k, 1e-3)
        d2 = (phi_of_k(b, k + h) - 2.0 * phi_of_k(b, k) + phi_of_k(b, k - h)) / (h * h)
        if not d2 > 0:
            curv_ok = False
            failures.append(f"Phi'' <= 0 at beta={b:.6g}")

    return AppendixReport(bad.size == 0, bad_idx.size == 0, margin_ok, curv_ok, failures)
