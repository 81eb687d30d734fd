"""Distribution distances, chain diagnostics and large-deviation tail fits."""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from numba import njit
from scipy import special

from . import analytic


def normal_cdf(x):
    return special.ndtr(x)


def normal_ppf(q):
    return special.ndtri(q)


def chi2_3_cdf(x):
    x = np.asarray(x, dtype=float)
    return special.gammainc(1.5, 0.5 * np.maximum(x, 0.0))


class Metric(str, Enum):
    KS = "KS"
    W1 = "W1"


@dataclass
class DistanceReport:
    metric: Metric
    value: float
    bootstrap_ci: tuple[float, float]
    n_samples: int
    target: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["metric"] = self.metric.value
        d["bootstrap_ci"] = list(self.bootstrap_ci)
        return d


def _check(samples, minimum: int = 100) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if x.size < minimum:
        raise ValueError(f"need at least {minimum} samples, got {x.size}")
    return x


def _ks_sorted(xs: np.ndarray, cdf: Callable) -> float:
    n = xs.size
    F = np.asarray(cdf(xs), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n), 0.0))


def _percentile_ci(value: float, boots: np.ndarray) -> tuple[float, float]:
    lo, hi = np.percentile(boots, [2.5, 97.5])
    # the percentile interval of a biased statistic can miss the point estimate
    return float(min(lo, value)), float(max(hi, value))


def ks_distance(samples, target_cdf: Callable, target: str = "target",
                resamples: int = 200, rng: np.random.Generator | None = None) -> DistanceReport:
    """Kolmogorov-Smirnov distance of the empirical law to ``target_cdf``."""
    x = np.sort(_check(samples))
    value = _ks_sorted(x, target_cdf)
    rng = np.random.default_rng(0) if rng is None else rng
    boots = np.array([_ks_sorted(np.sort(rng.choice(x, x.size)), target_cdf)
                      for _ in range(resamples)])
    return DistanceReport(Metric.KS, value, _percentile_ci(value, boots), x.size, target)


def ks_two_sample(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    pts = np.concatenate([a, b])
    Fa = np.searchsorted(a, pts, side="right") / a.size
    Fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(Fa - Fb)))


def _w1_sorted(xs: np.ndarray, quantile: Callable) -> float:
    q = np.asarray(quantile((np.arange(xs.size) + 0.5) / xs.size), dtype=float)
    return float(np.mean(np.abs(xs - q)))


def wasserstein1_empirical(samples, target_quantile: Callable, target: str = "target",
                           resamples: int = 200,
                           rng: np.random.Generator | None = None) -> DistanceReport:
    """1-D Wasserstein-1 distance via the quantile representation."""
    x = np.sort(_check(samples))
    value = _w1_sorted(x, target_quantile)
    rng = np.random.default_rng(0) if rng is None else rng
    boots = np.array([_w1_sorted(np.sort(rng.choice(x, x.size)), target_quantile)
                      for _ in range(resamples)])
    return DistanceReport(Metric.W1, value, _percentile_ci(value, boots), x.size, target)


def autocorrelation(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.size
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def effective_sample_size(series) -> float:
    """N / tau with tau = 1 + 2 sum of paired autocorrelations.

    Pairs (rho_{2m-1} + rho_{2m}) are summed until the first nonpositive one.
    A constant series has ESS N.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise ValueError("need a series of length >= 100")
    if np.ptp(x) == 0:
        return float(n)
    rho = autocorrelation(x)
    tau = 1.0
    for m in range(1, n // 2):
        pair = rho[2 * m - 1] + rho[2 * m]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(n / tau)


def multichain_ess(chains) -> float:
    return float(sum(effective_sample_size(c) for c in chains))


# ---------------------------------------------------------------- tail rates


@njit(cache=True, nogil=True)
def _tilted_norms(n, kappa, u_cos, u_phi, out):
    # |S|/n for sums of n i.i.d. spins tilted by exp(kappa * z)
    reps = out.shape[0]
    em = math.expm1(-2.0 * kappa) if kappa > 1e-8 else 0.0
    for r in range(reps):
        sx = 0.0
        sy = 0.0
        sz = 0.0
        base = r * n
        for j in range(n):
            u = u_cos[base + j]
            if kappa > 1e-8:
                w = 1.0 + math.log1p((1.0 - u) * em) / kappa
                if w < -1.0:
                    w = -1.0
            else:
                w = 2.0 * u - 1.0
            s = math.sqrt(max(0.0, 1.0 - w * w))
            ph = 2.0 * math.pi * u_phi[base + j]
            sx += s * math.cos(ph)
            sy += s * math.sin(ph)
            sz += w
        out[r] = math.sqrt(sx * sx + sy * sy + sz * sz) / n


def _draw_norms(n: int, kappa: float, reps: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(reps)
    chunk = max(1, (1 << 21) // n)
    for lo in range(0, reps, chunk):
        m = min(chunk, reps - lo)
        _tilted_norms(n, kappa, rng.random(m * n), rng.random(m * n), out[lo:lo + m])
    return out


@dataclass
class TailRateFit:
    beta: float
    x_norm: float
    n_grid: list[int]
    empirical_rates: list[float]
    standard_errors: list[float]
    extrapolated_rate: float
    theory_rate: float
    replicates: int
    dropped: list[int] = field(default_factory=list)

    @property
    def relative_error(self) -> float:
        return abs(self.extrapolated_rate - self.theory_rate) / self.theory_rate

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "rate_hat", "se"])
            for n, r, s in zip(self.n_grid, self.empirical_rates, self.standard_errors):
                w.writerow([n, repr(float(r)), repr(float(s))])


def _proposal_kappas(beta: float, x: float, n: int) -> np.ndarray:
    if beta == 0:
        return np.array([float(analytic.g_inverse(x))])
    top = x
    if beta > analytic.BETA_CRITICAL:
        top = max(x, analytic.k2(beta) / beta)
    step = 0.5 / math.sqrt(n)
    m = np.arange(0.0, min(top + 3.0 / math.sqrt(n), 0.99), step)
    m = np.union1d(m, np.clip(x + step * np.array([-0.5, 0.0, 0.5, 1.0]), 0.0, 0.99))
    return np.asarray(analytic.g_inverse(m), dtype=float)


def _log_tail_probability(beta: float, x: float, n: int, replicates: int,
                          rng: np.random.Generator) -> tuple[float, float]:
    """log P_beta[|M_n| >= x] and its standard error by importance sampling.

    Proposals are i.i.d. spins tilted towards a fixed axis, mixed over several
    tilts.  Since the event and the Gibbs weight depend only on |S|, the
    likelihood ratio is the rotation-averaged one,
    (sinh k / k)^n k|S| / sinh(k|S|), combined by the balance heuristic.
    """
    kappas = _proposal_kappas(beta, x, n)
    J = kappas.size
    if J == 1:
        counts = np.array([replicates])
    else:
        # double weight on tilts aimed at the threshold
        near = np.abs(analytic.g(kappas) - x) <= 0.5 / math.sqrt(n)
        share = np.where(near, 2.0, 1.0)
        counts = np.maximum(1, np.floor(replicates * share / share.sum())).astype(int)
    m = np.concatenate([_draw_norms(n, float(k), int(c), rng) for k, c in zip(kappas, counts)])
    frac = counts / counts.sum()
    ns = n * m
    # log q_j(s)/p_0(s) for each tilt
    lq = (np.log(frac)[:, None] - n * np.asarray(analytic.log_sinhc(kappas))[:, None]
          + np.asarray(analytic.log_sinhc(np.outer(kappas, ns))))
    logw = -special.logsumexp(lq, axis=0) + 0.5 * beta * n * m * m
    hit = m >= x
    if not hit.any():
        return -math.inf, math.inf
    N = m.size
    lnum = special.logsumexp(logw[hit]) - math.log(N)
    if beta == 0:
        lden = 0.0
        # relative variance of the numerator mean
        wn = np.exp(logw - lnum) * hit
        rel = float(np.std(wn, ddof=1) / math.sqrt(N))
    else:
        lden = special.logsumexp(logw) - math.log(N)
        a = np.exp(logw - lnum) * hit
        b = np.exp(logw - lden)
        d = a - b
        rel = float(np.std(d, ddof=1) / math.sqrt(N))
    return lnum - lden, rel


def default_n_grid(beta: float, x: float) -> list[int]:
    if beta == 0:
        return [50, 100, 200, 400]
    rate = analytic.rate_I_beta(beta, x, centered=True)
    return [int(math.ceil(k / rate)) for k in (4, 8, 16, 32)]


def tail_rate_fit(beta: float, x_norm: float, n_grid=None, replicates: int = 100_000,
                  rng: np.random.Generator | int | None = None,
                  threads: int = 1) -> TailRateFit:
    """Estimate -(1/n) log P[|M_n| >= x] over ``n_grid`` and extrapolate to n = inf.

    Probabilities come from exact importance sampling of i.i.d. tilted spins
    reweighted to the Gibbs measure, so no Markov chain is involved.  The
    extrapolation is a linear fit in 1/n.
    """
    if x_norm <= 0 or x_norm >= 1:
        raise ValueError("x_norm must lie in (0, 1); x = 0 is the rate minimiser")
    if replicates < 10_000:
        raise ValueError("need at least 1e4 replicates per n")
    n_grid = default_n_grid(beta, x_norm) if n_grid is None else [int(n) for n in n_grid]
    seed = rng if isinstance(rng, (int, np.integer)) else (
        0 if rng is None else int(rng.integers(2**63)))
    children = np.random.SeedSequence(seed).spawn(len(n_grid))

    def task(i):
        gen = np.random.Generator(np.random.Philox(children[i]))
        return _log_tail_probability(beta, x_norm, n_grid[i], replicates, gen)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = list(ex.map(task, range(len(n_grid))))
    ns, rates, ses, dropped = [], [], [], []
    for n, (lp, rel) in zip(n_grid, results):
        if not math.isfinite(lp):
            warnings.warn(f"no exceedances at n={n}; dropped", RuntimeWarning, stacklevel=2)
            dropped.append(n)
            continue
        ns.append(n)
        rates.append(-lp / n)
        ses.append(rel / n)
    if not ns:
        raise RuntimeError("all n dropped: no exceedances anywhere")
    if len(ns) >= 2:
        inv = 1.0 / np.asarray(ns, dtype=float)
        slope, intercept = np.polyfit(inv, rates, 1)
        extrap = float(intercept)
    else:
        extrap = float(rates[0])
    theory = float(analytic.rate_I_beta(beta, x_norm, centered=True))
    return TailRateFit(float(beta), float(x_norm), ns, [float(r) for r in rates],
                       [float(s) for s in ses], extrap, theory, int(replicates), dropped)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
