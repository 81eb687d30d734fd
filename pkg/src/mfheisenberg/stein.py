"""Numerical Stein-method toolkit for the critical limit law.

The law has density p(t) = t^5 exp(-a t^2) / z on t >= 0 with a = 3c, and is
characterised by the operator [T f](x) = x f'(x) + 6 (1 - c x^2) f(x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import analytic


@dataclass(frozen=True)
class CriticalDensity:
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")

    @property
    def a(self) -> float:
        return 3.0 * self.c

    @property
    def z(self) -> float:
        # int_0^inf t^5 e^{-a t^2} dt = Gamma(3) / (2 a^3) = 1 / a^3
        return 1.0 / self.a**3

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t >= 0, t**5 * np.exp(-self.a * t * t) / self.z, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        return critical_cdf(t, self.c)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        out = np.sqrt(special.gammaincinv(3.0, q) / self.a)
        return float(out) if out.ndim == 0 else out

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return self.ppf(rng.random(size))

    def mean(self) -> float:
        # int t^6 e^{-a t^2} / int t^5 e^{-a t^2} = Gamma(7/2) / (Gamma(3) sqrt(a))
        return math.gamma(3.5) / (2.0 * math.sqrt(self.a))


def critical_cdf(t, c: float):
    """Closed-form CDF 1 - e^{-u}(1 + u + u^2/2), u = 3 c t^2; zero for t < 0."""
    t = np.asarray(t, dtype=float)
    u = 3.0 * c * np.where(t > 0, t, 0.0) ** 2
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(u), 1.0, -np.expm1(-u) - np.exp(-u) * (u + 0.5 * u * u))
    out = np.where(t > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def stein_operator_apply(f: Callable, f_deriv: Callable, x, c: float):
    x = np.asarray(x, dtype=float)
    out = x * f_deriv(x) + 6.0 * (1.0 - c * x * x) * f(x)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- Stein equation


class QuadratureError(RuntimeError):
    pass


def _quad(func, lo, hi, **kw):
    with np.errstate(over="ignore", under="ignore"):
        val, err, info = integrate.quad(func, lo, hi, full_output=True, limit=200, **kw)[:3]
    if err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(f"quad on [{lo}, {hi}] did not converge: {val} +- {err}")
    return val


@dataclass
class SteinSolution:
    """Solution f_h of T f = h - E h(X) on a grid, with a pointwise evaluator."""

    c: float
    h: Callable = field(repr=False)
    h_mean: float
    grid: np.ndarray
    values: np.ndarray
    small_t: float = 1e-3

    @property
    def t_mode(self) -> float:
        return math.sqrt(5.0 / (6.0 * self.c))

    def at(self, t: float, form: str | None = None) -> float:
        """f_h(t) by the forward integral (t <= mode) or the tail integral."""
        a = 3.0 * self.c
        h, eh = self.h, self.h_mean
        if t < self.small_t and form is None:
            return (h(0.0) - eh) / 6.0
        if form is None:
            form = "forward" if t <= self.t_mode else "tail"
        if form == "forward":
            # (1/t) int_0^t (h(s) - Eh) (s/t)^5 e^{a (t^2 - s^2)} ds
            val = _quad(lambda s: (h(s) - eh) * (s / t) ** 5 * math.exp(a * (t * t - s * s)),
                        0.0, t, epsabs=1e-15, epsrel=1e-13)
            return val / t
        # -(1/t) int_0^inf (h(t+v) - Eh) ((t+v)/t)^5 e^{-a (2 t v + v^2)} dv
        val = _quad(lambda v: (h(t + v) - eh) * ((t + v) / t) ** 5
                    * math.exp(-a * (2.0 * t * v + v * v)),
                    0.0, np.inf, epsabs=1e-15, epsrel=1e-13)
        return -val / t

    def derivative_from_equation(self, h_prime_at_zero: float | None = None) -> np.ndarray:
        """f_h' on the grid via t f' = h - Eh - 6 (1 - c t^2) f."""
        t = self.grid
        hv = np.array([self.h(s) for s in t])
        with np.errstate(divide="ignore", invalid="ignore"):
            d = (hv - self.h_mean - 6.0 * (1.0 - self.c * t * t) * self.values) / t
        small = t < self.small_t
        if small.any():
            d[small] = (h_prime_at_zero / 7.0 if h_prime_at_zero is not None
                        else d[~small][0])
        return d

    def residual(self, t_min: float = 1e-3) -> float:
        """Max |T f_h - (h - Eh)| on grid points t >= t_min, with f_h' from a
        five-point finite difference of the evaluator."""
        worst = 0.0
        for t in self.grid[self.grid >= t_min]:
            form = "forward" if t <= self.t_mode else "tail"
            d = min(1e-3, t / 4.0)
            fm2, fm1, fp1, fp2 = (self.at(t + k * d, form) for k in (-2, -1, 1, 2))
            fd = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * d)
            f0 = self.at(t, form)
            r = t * fd + 6.0 * (1.0 - self.c * t * t) * f0 - (self.h(t) - self.h_mean)
            worst = max(worst, abs(r))
        return worst


def expectation(h: Callable, c: float) -> float:
    """E h(X) under the critical law by adaptive quadrature."""
    dens = CriticalDensity(c)
    a = dens.a
    return _quad(lambda t: h(t) * t**5 * math.exp(-a * t * t) * a**3, 0.0, np.inf,
                 epsabs=1e-14, epsrel=1e-13)


def stein_grid(c: float, points: int = 400, t_max: float | None = None) -> np.ndarray:
    """Geometric grid near zero, then uniform out to max(6/sqrt(c), 10)."""
    T = max(6.0 / math.sqrt(c), 10.0) if t_max is None else t_max
    knee = min(0.1 / math.sqrt(c), T / 10.0)
    near = np.geomspace(1e-4, knee, points // 4, endpoint=False)
    far = np.linspace(knee, T, points - points // 4)
    return np.concatenate([[0.0], near, far])


def solve_stein_equation(h: Callable, c: float, grid=None) -> SteinSolution:
    grid = stein_grid(c) if grid is None else np.asarray(grid, dtype=float)
    eh = expectation(h, c)
    sol = SteinSolution(c, h, eh, grid, np.empty_like(grid))
    sol.values = np.array([sol.at(float(t)) for t in grid])
    if not np.all(np.isfinite(sol.values)):
        raise QuadratureError("non-finite Stein solution values")
    return sol


# ---------------------------------------------------------------- bounds


@dataclass(frozen=True)
class TestFunction:
    """A C^2 test function with its derivatives and sup-norms on [0, inf)."""

    name: str
    f: Callable
    df: Callable
    d2f: Callable
    sup: float
    sup_d: float


def default_dictionary() -> list[TestFunction]:
    return [
        TestFunction("const", lambda s: 1.0 + 0.0 * s, lambda s: 0.0 * s, lambda s: 0.0 * s,
                     1.0, 0.0),
        TestFunction("tanh", np.tanh, lambda s: 1.0 / np.cosh(s) ** 2,
                     lambda s: -2.0 * np.tanh(s) / np.cosh(s) ** 2, 1.0, 1.0),
        TestFunction("cos3", lambda s: np.cos(3.0 * s), lambda s: -3.0 * np.sin(3.0 * s),
                     lambda s: -9.0 * np.cos(3.0 * s), 1.0, 3.0),
        TestFunction("sin", np.sin, np.cos, lambda s: -np.sin(s), 1.0, 1.0),
        TestFunction("gauss", lambda s: np.exp(-s * s), lambda s: -2.0 * s * np.exp(-s * s),
                     lambda s: (4.0 * s * s - 2.0) * np.exp(-s * s), 1.0, math.sqrt(2.0 / math.e)),
        TestFunction("rational", lambda s: s / (1.0 + s * s),
                     lambda s: (1.0 - s * s) / (1.0 + s * s) ** 2,
                     lambda s: 2.0 * s * (s * s - 3.0) / (1.0 + s * s) ** 3, 0.5, 1.0),
    ]


@dataclass
class BoundCheck:
    name: str
    sup_f: float
    sup_df: float
    sup_d2f: float
    bound_f: float
    bound_df: float
    bound_df_proof: float
    residual: float

    @property
    def passed(self) -> bool:
        return (self.sup_f <= self.bound_f and self.sup_df <= self.bound_df
                and math.isfinite(self.sup_d2f))


@dataclass
class BoundReport:
    c: float
    checks: list[BoundCheck]
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def to_dict(self) -> dict:
        return {"c": self.c, "passed": self.passed, "failures": self.failures,
                "checks": [dict(vars(ch), passed=ch.passed) for ch in self.checks]}


def verify_solution_bounds(dictionary=None, c: float = 1.0, grid=None,
                           with_residual: bool = False) -> BoundReport:
    """Grid estimates of ||f_h||, ||f_h'||, ||f_h''|| against the stated bounds.

    The derivative bound is checked in the form 42 sqrt(c) ||h|| + 3 ||h'||;
    the constant 42 sqrt(5c/6) from the proof is reported alongside.
    """
    dictionary = default_dictionary() if dictionary is None else dictionary
    checks, failures = [], []
    for tf in dictionary:
        sol = solve_stein_equation(tf.f, c, grid)
        d1 = sol.derivative_from_equation(float(tf.df(0.0)))
        d2 = np.gradient(d1, sol.grid)
        ch = BoundCheck(
            tf.name,
            float(np.max(np.abs(sol.values))),
            float(np.max(np.abs(d1))),
            float(np.max(np.abs(d2))),
            5.0 * tf.sup,
            42.0 * math.sqrt(c) * tf.sup + 3.0 * tf.sup_d,
            42.0 * math.sqrt(5.0 * c / 6.0) * tf.sup + 3.0 * tf.sup_d,
            sol.residual() if with_residual else float("nan"),
        )
        if not ch.passed:
            failures.append(tf.name)
        checks.append(ch)
    return BoundReport(c, checks, failures)


# ---------------------------------------------------------------- sphere moments


@dataclass(frozen=True)
class SphereMoments:
    Z: float
    mean_coeff: float
    a_par: float
    a_perp: float


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(200)


def sphere_conditional_moments(c: float) -> SphereMoments:
    """Moments of the density proportional to exp(c <theta, r>) on S^2.

    The azimuth integrates out, leaving Gauss-Legendre quadrature in the
    cosine w: Z = (1/2) int e^{c w} dw, and so on.  The exponent is shifted by
    c to avoid overflow; Z is rescaled afterwards.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    w = _GL_NODES
    e = np.exp(c * (w - 1.0)) * _GL_WEIGHTS
    z0 = 0.5 * e.sum()
    mean = 0.5 * (w * e).sum() / z0
    par = 0.5 * (w * w * e).sum() / z0
    perp = 0.5 * (0.5 * (1.0 - w * w) * e).sum() / z0
    return SphereMoments(float(z0 * math.exp(c)), float(mean), float(par), float(perp))


# ---------------------------------------------------------------- discrepancy


def polynomial_dictionary() -> dict[str, tuple[Callable, Callable]]:
    return {
        "x": (lambda x: x, lambda x: np.ones_like(x)),
        "x2": (lambda x: x * x, lambda x: 2.0 * x),
        "tanh": (np.tanh, lambda x: 1.0 / np.cosh(x) ** 2),
    }


def stein_discrepancy(samples, c: float, dictionary=None) -> dict[str, tuple[float, float]]:
    """|mean T f| over samples with its standard error, per test function."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty samples")
    dictionary = polynomial_dictionary() if dictionary is None else dictionary
    out = {}
    for name, (f, df) in dictionary.items():
        v = x * df(x) + 6.0 * (1.0 - c * x * x) * f(x)
        out[name] = (abs(float(v.mean())), float(v.std(ddof=1) / math.sqrt(x.size)))
    return out


def normaliser_check(c: float) -> tuple[float, float]:
    """(closed-form z, quadrature z) for the unnormalised density t^5 e^{-3ct^2}."""
    a = 3.0 * c
    quad = _quad(lambda t: t**5 * math.exp(-a * t * t), 0.0, np.inf, epsabs=1e-15, epsrel=1e-13)
    return 1.0 / (27.0 * c**3), quad


def langevin_closed_forms(c: float) -> SphereMoments:
    """Closed forms matching ``sphere_conditional_moments``."""
    if c == 0:
        return SphereMoments(1.0, 0.0, 1.0 / 3.0, 1.0 / 3.0)
    gc = analytic.g(c)
    a_perp = gc / c if c >= analytic.SERIES_SWITCH else (
        1.0 / 3.0 - c * c / 45.0 + 2.0 * c**4 / 945.0 - c**6 / 4725.0)
    return SphereMoments(math.exp(float(analytic.log_sinhc(c))), gc, 1.0 - 2.0 * a_perp, a_perp)
