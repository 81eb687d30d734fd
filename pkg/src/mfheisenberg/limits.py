"""Rescaled total-spin observables and exchangeable-pair diagnostics.

Each regime has its own observable W of the total spin S:

* subcritical, beta < 3: the 3-vector ``sqrt((3 - beta)/n) S``;
* supercritical, beta > 3: ``sqrt(n) (beta^2 |S|^2 / (n^2 k2^2) - 1)``;
* critical, beta = 3: ``c3 |S|^2 / n^{3/2}`` with c3 calibrated so E W = 1.

The pair (W, W') comes from one Gibbs-sampler step at a uniformly chosen
site.  ``pair_diagnostics`` estimates E[W' - W | sigma] and
E[(W' - W)^2 | sigma] by Monte Carlo over conditional resamples and fits them
against the predicted drift forms.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from . import analytic
from .analytic import Regime, regime_of
from .sampler import Configuration, _conditional_draw


def _totals(x) -> np.ndarray:
    if isinstance(x, Configuration):
        return x.total
    return np.asarray(x, dtype=float)


def observable_subcritical(total, n: int, beta: float) -> np.ndarray:
    if beta >= 3:
        raise ValueError("subcritical observable needs beta < 3")
    return math.sqrt((3.0 - beta) / n) * _totals(total)


def observable_supercritical(total, n: int, beta: float, k2: float | None = None):
    if beta <= 3:
        raise ValueError("supercritical observable needs beta > 3")
    k = analytic.k2(beta) if k2 is None else k2
    S = _totals(total)
    s2 = np.einsum("...i,...i->...", S, S)
    out = math.sqrt(n) * (beta**2 * s2 / (n * n * k * k) - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def observable_critical(total, n: int, c3: float):
    S = _totals(total)
    s2 = np.einsum("...i,...i->...", S, S)
    out = c3 * s2 / n**1.5
    return float(out) if np.ndim(out) == 0 else out


# c3 implied by E X = 1 under the density t^5 exp(-3 c t^2) with c = 1/(5 c3)
PINNED_C3 = 256.0 / (375.0 * math.pi)


@dataclass(frozen=True)
class CriticalCalibration:
    c3_hat: float
    c_hat: float
    n_used: int
    se: float


def calibrate_c3(S2, n: int, ess: float | None = None) -> CriticalCalibration:
    """Empirical normaliser c3 = n^{3/2} / mean(|S|^2) at beta = 3.

    ``S2`` is an array of squared total lengths (or a SampleSeries).  The
    standard error uses ``ess`` in place of the sample count when given.
    """
    if hasattr(S2, "S2"):
        S2 = S2.S2
    S2 = np.asarray(S2, dtype=float).ravel()
    if S2.size == 0:
        raise ValueError("empty series")
    mean = float(S2.mean())
    c3 = n**1.5 / mean
    m = S2.size if ess is None else ess
    se_mean = float(S2.std(ddof=1)) / math.sqrt(m) if S2.size > 1 else float("nan")
    return CriticalCalibration(c3, 1.0 / (5.0 * c3), int(S2.size), c3 * se_mean / mean)


@dataclass(frozen=True)
class MomentCoefficients:
    a_par: float
    a_perp: float
    a_cross: float


def conditional_moment_coefficients(c: float) -> MomentCoefficients:
    """Second-moment coefficients of the conditional spin law with concentration c.

    E[theta theta^T] = a_par P + a_perp P_perp and E[theta] = a_cross r, where
    P projects onto the mean direction r.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c < analytic.SERIES_SWITCH:
        c2 = c * c
        a_perp = 1.0 / 3.0 - c2 * (1.0 / 45.0 - c2 * (2.0 / 945.0 - c2 / 4725.0))
    else:
        a_perp = analytic.g(c) / c
    return MomentCoefficients(1.0 - 2.0 * a_perp, a_perp, analytic.g(c))


# ---------------------------------------------------------------- pair kernels


@njit(cache=True, nogil=True)
def _pair_sums(spins, total, beta, sites, u_cos, u_phi, out):
    # accumulates over replicates: dS (3), dS dS^T (6), dQ, dQ^2
    # with dS = sigma* - sigma_I and dQ = |S'|^2 - |S|^2
    n = spins.shape[0]
    new = np.empty(3)
    for k in range(out.shape[0]):
        out[k] = 0.0
    for t in range(sites.shape[0]):
        i = sites[t]
        rx = total[0] - spins[i, 0]
        ry = total[1] - spins[i, 1]
        rz = total[2] - spins[i, 2]
        _conditional_draw(rx, ry, rz, beta, n, u_cos[t], u_phi[t], new)
        dx = new[0] - spins[i, 0]
        dy = new[1] - spins[i, 1]
        dz = new[2] - spins[i, 2]
        dq = 2.0 * (dx * rx + dy * ry + dz * rz)
        out[0] += dx
        out[1] += dy
        out[2] += dz
        out[3] += dx * dx
        out[4] += dy * dy
        out[5] += dz * dz
        out[6] += dx * dy
        out[7] += dx * dz
        out[8] += dy * dz
        out[9] += dq
        out[10] += dq * dq
    m = sites.shape[0]
    for k in range(out.shape[0]):
        out[k] /= m


def exact_pair_moments(cfg: Configuration, beta: float) -> dict:
    """Closed-form E[dS | sigma], E[dQ | sigma], E[dQ^2 | sigma] averaged over the site.

    Uses the conditional-law coefficients, so it is an independent check on
    the Monte Carlo estimates from ``pair_diagnostics``.
    """
    n = cfg.n
    sig = cfg.spins
    rest = cfg.total[None, :] - sig
    rn = np.linalg.norm(rest, axis=1)
    c = beta * rn / n
    gc = np.asarray(analytic.g(c))
    r = rest / np.where(rn > 0, rn, 1.0)[:, None]
    proj = np.einsum("ij,ij->i", sig, rest)
    a_perp = np.where(c < analytic.SERIES_SWITCH,
                      1.0 / 3.0 - c * c / 45.0 + 2.0 * c**4 / 945.0,
                      gc / np.where(c > 0, c, 1.0))
    a_par = 1.0 - 2.0 * a_perp
    dS = np.mean(gc[:, None] * r - sig, axis=0)
    dQ = np.mean(2.0 * (gc * rn - proj))
    dQ2 = np.mean(4.0 * (a_par * rn * rn - 2.0 * gc * rn * proj + proj * proj))
    dS2 = np.mean(2.0 - 2.0 * gc * proj / np.where(rn > 0, rn, 1.0))
    return {"dS": dS, "dS2": float(dS2), "dQ": float(dQ), "dQ2": float(dQ2)}


def pair_moments(cfg: Configuration, beta: float, replicates: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo conditional moments of one Gibbs step from ``cfg``.

    Returns [E dS (3), E dS dS^T (xx, yy, zz, xy, xz, yz), E dQ, E dQ^2].
    """
    out = np.empty(11)
    sites = rng.integers(0, cfg.n, size=replicates)
    _pair_sums(cfg.spins, cfg.total, float(beta), sites,
               rng.random(replicates), rng.random(replicates), out)
    return out


# ---------------------------------------------------------------- diagnostics


@dataclass
class PairDiagnostics:
    regime: Regime
    lambda_hat: float
    lambda_theory: float
    drift_residual_norm: float
    quad_var_ratio: float
    replicates: int
    snapshots: int
    fits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def _ols(y: np.ndarray, X: np.ndarray):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(1, y.size - X.shape[1])
    cov = (resid @ resid / dof) * np.linalg.inv(X.T @ X)
    return coef, np.sqrt(np.diag(cov)), resid


def _exact_row(cfg: Configuration, beta: float) -> np.ndarray:
    e = exact_pair_moments(cfg, beta)
    row = np.zeros(11)
    row[0:3] = e["dS"]
    row[3:6] = e["dS2"] / 3.0  # only the trace is used downstream
    row[9] = e["dQ"]
    row[10] = e["dQ2"]
    return row


def pair_diagnostics(snapshots, beta: float, replicates: int, rng: np.random.Generator,
                     c3: float | None = None, exact: bool = False) -> PairDiagnostics:
    """Fit the empirical pair drift and quadratic variation to their predicted forms.

    Drift is regressed by OLS with an intercept on W (sub/supercritical) or on
    (1, W^2) (critical).  At beta = 3, ``c3`` is the calibrated normaliser.
    With ``exact=True`` the conditional expectations given each snapshot are
    computed in closed form instead of by resampling.
    """
    if replicates < 100 and not exact:
        raise ValueError("need at least 100 replicates per snapshot")
    if len(snapshots) < 10:
        raise ValueError("need at least 10 snapshots")
    n = snapshots[0].n
    reg = regime_of(beta)
    if exact:
        mom = np.array([_exact_row(s, beta) for s in snapshots])
    else:
        mom = np.array([pair_moments(s, beta, replicates, rng) for s in snapshots])
    totals = np.array([s.total for s in snapshots])
    s2 = np.einsum("ij,ij->i", totals, totals)
    fits: dict = {}

    if reg is Regime.SUBCRITICAL:
        a = math.sqrt(3.0 - beta)
        W = a * totals / math.sqrt(n)
        drift = a * mom[:, 0:3] / math.sqrt(n)
        y = drift.ravel()
        x = W.ravel()
        coef, se, resid = _ols(y, np.column_stack([np.ones_like(x), x]))
        lam = (1.0 - beta / 3.0) / n
        qv_trace = (a * a / n) * mom[:, 3:6].sum(axis=1)
        qv_ratio = float(qv_trace.mean() / (3.0 * 2.0 * lam))
        fits["drift_slope"] = {"fitted": coef[1], "se": se[1], "theory": -lam}
        fits["drift_intercept"] = {"fitted": coef[0], "se": se[0], "theory": 0.0}
        resid_norm = float(np.mean(np.linalg.norm(resid.reshape(-1, 3), axis=1)))
        return PairDiagnostics(reg, -coef[1], lam, resid_norm, qv_ratio, replicates,
                               len(snapshots), fits)

    if reg is Regime.SUPERCRITICAL:
        k = analytic.k2(beta)
        scale = math.sqrt(n) * beta**2 / (n * n * k * k)
        W = scale * s2 - math.sqrt(n)
        drift = scale * mom[:, 9]
        coef, se, resid = _ols(drift, np.column_stack([np.ones_like(W), W]))
        lam = analytic.pair_lambda(beta) / n
        qv = scale * scale * mom[:, 10]
        qv_ratio = float(qv.mean() / (2.0 * lam * analytic.sigma2_supercritical(beta)))
        fits["drift_slope"] = {"fitted": coef[1], "se": se[1], "theory": -lam}
        fits["drift_intercept"] = {"fitted": coef[0], "se": se[0], "theory": 0.0}
        return PairDiagnostics(reg, -coef[1], lam, float(np.mean(np.abs(resid))), qv_ratio,
                               replicates, len(snapshots), fits)

    if c3 is None:
        raise ValueError("critical diagnostics need the calibrated c3")
    scale = c3 / n**1.5
    W = scale * s2
    drift = scale * mom[:, 9]
    qv = scale * scale * mom[:, 10]
    kk = 2.0 * c3 / (3.0 * n**1.5)
    c = 1.0 / (5.0 * c3)
    coef, se, resid = _ols(drift, np.column_stack([np.ones_like(W), W * W]))
    qcoef, qse, _ = _ols(qv, np.column_stack([np.ones_like(W), W]))
    fits["drift_intercept"] = {"fitted": coef[0], "se": se[0], "theory": 3.0 * kk}
    fits["drift_curvature"] = {"fitted": coef[1], "se": se[1], "theory": -3.0 * kk * c}
    fits["qv_slope"] = {"fitted": qcoef[1], "se": qse[1], "theory": kk}
    fits["qv_intercept"] = {"fitted": qcoef[0], "se": qse[0], "theory": 0.0}
    return PairDiagnostics(reg, coef[0] / 3.0, kk, float(np.mean(np.abs(resid))),
                           float(qcoef[1] / kk), replicates, len(snapshots), fits)
