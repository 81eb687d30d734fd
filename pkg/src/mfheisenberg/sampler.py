"""Random-scan Gibbs sampler for the mean-field Heisenberg model.

A single-site update replaces spin i by an exact draw from its conditional
law, which is the von Mises-Fisher law on S^2 with mean direction along the
rest-of-system total and concentration ``beta * |S - sigma_i| / n``.  The
cosine to the mean direction is drawn by inverting its CDF in closed form.

RNG contract: every chain owns a ``numpy.random.Generator`` backed by the
counter-based Philox bit generator, seeded from
``SeedSequence(master_seed, spawn_key=(chain_id,))``.  Uniform variates are
generated in blocks on the Python side and handed to numba kernels, so a
chain is bit-reproducible from ``(seed, chain_id, params)`` alone.
"""
from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from . import __version__

SMALL_CONCENTRATION = 1e-8
SMALL_FIELD = 1e-12
REFRESH_EVERY = 1024
BLOCK_UPDATES = 1 << 20


def make_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    """Philox generator for stream ``chain_id`` of master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chain_id),))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------- kernels


@njit(cache=True, nogil=True)
def _vmf_cosine(c, u):
    # inverse CDF of density proportional to exp(c w) on [-1, 1]
    if c < SMALL_CONCENTRATION:
        return 2.0 * u - 1.0
    w = 1.0 + math.log1p((1.0 - u) * math.expm1(-2.0 * c)) / c
    if w < -1.0:
        w = -1.0
    elif w > 1.0:
        w = 1.0
    return w


@njit(cache=True, nogil=True)
def _place(dx, dy, dz, w, phi, out):
    # unit vector with cosine w to (dx, dy, dz) and azimuth phi about it
    sign = 1.0 if dz >= 0.0 else -1.0
    a = -1.0 / (sign + dz)
    b = dx * dy * a
    e1x = 1.0 + sign * dx * dx * a
    e1y = sign * b
    e1z = -sign * dx
    e2x = b
    e2y = sign + dy * dy * a
    e2z = -dy
    s = math.sqrt(max(0.0, 1.0 - w * w))
    cp = math.cos(phi)
    sp = math.sin(phi)
    x = w * dx + s * (cp * e1x + sp * e2x)
    y = w * dy + s * (cp * e1y + sp * e2y)
    z = w * dz + s * (cp * e1z + sp * e2z)
    nrm = math.sqrt(x * x + y * y + z * z)
    out[0] = x / nrm
    out[1] = y / nrm
    out[2] = z / nrm


@njit(cache=True, nogil=True)
def _conditional_draw(rx, ry, rz, beta, n, u_cos, u_phi, out):
    # draw a spin from its conditional law given rest-of-system total r
    rn = math.sqrt(rx * rx + ry * ry + rz * rz)
    c = beta * rn / n
    phi = 2.0 * math.pi * u_phi
    if rn < SMALL_FIELD or c < SMALL_CONCENTRATION:
        _place(0.0, 0.0, 1.0, 2.0 * u_cos - 1.0, phi, out)
    else:
        _place(rx / rn, ry / rn, rz / rn, _vmf_cosine(c, u_cos), phi, out)


@njit(cache=True, nogil=True)
def _sweeps_kernel(spins, total, beta, sites, u_cos, u_phi, n_sweeps, trace):
    n = spins.shape[0]
    new = np.empty(3)
    t = 0
    for s in range(n_sweeps):
        for _ in range(n):
            i = sites[t]
            rx = total[0] - spins[i, 0]
            ry = total[1] - spins[i, 1]
            rz = total[2] - spins[i, 2]
            _conditional_draw(rx, ry, rz, beta, n, u_cos[t], u_phi[t], new)
            total[0] = rx + new[0]
            total[1] = ry + new[1]
            total[2] = rz + new[2]
            spins[i, 0] = new[0]
            spins[i, 1] = new[1]
            spins[i, 2] = new[2]
            t += 1
        trace[s, 0] = total[0]
        trace[s, 1] = total[1]
        trace[s, 2] = total[2]


@njit(cache=True, nogil=True)
def _vmf_batch(dx, dy, dz, c, u_cos, u_phi, out):
    v = np.empty(3)
    for k in range(u_cos.shape[0]):
        if c < SMALL_CONCENTRATION:
            _place(dx, dy, dz, 2.0 * u_cos[k] - 1.0, 2.0 * math.pi * u_phi[k], v)
        else:
            _place(dx, dy, dz, _vmf_cosine(c, u_cos[k]), 2.0 * math.pi * u_phi[k], v)
        out[k, 0] = v[0]
        out[k, 1] = v[1]
        out[k, 2] = v[2]


# ---------------------------------------------------------------- state


@dataclass
class Configuration:
    """n unit spins with their cached vector total."""

    spins: np.ndarray
    total: np.ndarray

    @property
    def n(self) -> int:
        return self.spins.shape[0]

    @classmethod
    def from_spins(cls, spins) -> "Configuration":
        spins = np.ascontiguousarray(spins, dtype=float)
        if spins.ndim != 2 or spins.shape[1] != 3:
            raise ValueError("spins must have shape (n, 3)")
        return cls(spins, spins.sum(axis=0))

    def refresh(self) -> None:
        self.total = self.spins.sum(axis=0)

    def total_drift(self) -> float:
        return float(np.max(np.abs(self.total - self.spins.sum(axis=0))))

    def copy(self) -> "Configuration":
        return Configuration(self.spins.copy(), self.total.copy())


def uniform_spins(shape, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform points on S^2: z uniform on [-1, 1], azimuth uniform."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    z = rng.uniform(-1.0, 1.0, size=shape)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)


def init_uniform(n: int, rng: np.random.Generator) -> Configuration:
    if n < 2:
        raise ValueError("need at least two sites")
    return Configuration.from_spins(uniform_spins(n, rng))


def sample_conditional_spin(direction, c: float, rng: np.random.Generator,
                            size: int | None = None) -> np.ndarray:
    """Draw from the density proportional to exp(c <theta, direction>) on S^2."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    if c < 0:
        raise ValueError("concentration must be nonnegative")
    m = 1 if size is None else int(size)
    out = np.empty((m, 3))
    _vmf_batch(d[0], d[1], d[2], float(c), rng.random(m), rng.random(m), out)
    return out[0] if size is None else out


def _run_sweeps(cfg: Configuration, beta: float, n_sweeps: int,
                rng: np.random.Generator) -> np.ndarray:
    n = cfg.n
    trace = np.empty((n_sweeps, 3))
    per_block = max(1, BLOCK_UPDATES // n)
    done = 0
    while done < n_sweeps:
        m = min(per_block, n_sweeps - done, REFRESH_EVERY)
        k = m * n
        sites = rng.integers(0, n, size=k)
        u_cos = rng.random(k)
        u_phi = rng.random(k)
        _sweeps_kernel(cfg.spins, cfg.total, float(beta), sites, u_cos, u_phi,
                       m, trace[done:done + m])
        done += m
        cfg.refresh()
        trace[done - 1] = cfg.total
    return trace


def gibbs_sweep(cfg: Configuration, beta: float, rng: np.random.Generator) -> Configuration:
    """n random-scan single-site heat-bath updates, in place."""
    _run_sweeps(cfg, beta, 1, rng)
    return cfg


# ---------------------------------------------------------------- chains


@dataclass(frozen=True)
class ChainParams:
    n: int
    beta: float
    sweeps: int
    burnin: int | None = None
    thin: int = 1
    seed: int = 0
    chain_id: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.burnin is not None and not (self.sweeps > self.burnin >= 0):
            raise ValueError("need sweeps > burnin >= 0")


class ChainRunError(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class SampleSeries:
    """Recorded observables of one chain, one row per kept sweep."""

    params: ChainParams
    sweep: np.ndarray
    S: np.ndarray  # (m, 3) vector totals
    burnin_used: int = 0
    wall_time: float = 0.0
    final: Configuration | None = field(default=None, repr=False)

    @property
    def S2(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.S, self.S)

    @property
    def h(self) -> np.ndarray:
        n = self.params.n
        return -self.S2 / (2.0 * n * n)

    @property
    def magnetization(self) -> np.ndarray:
        return np.sqrt(self.S2) / self.params.n

    def __len__(self) -> int:
        return self.sweep.shape[0]

    def to_csv(self, path) -> Path:
        path = Path(path)
        s2, h = self.S2, self.h
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep", "Sx", "Sy", "Sz", "S2", "h"])
            for k in range(len(self)):
                sx, sy, sz = self.S[k]
                w.writerow([int(self.sweep[k]), repr(float(sx)), repr(float(sy)),
                            repr(float(sz)), repr(float(s2[k])), repr(float(h[k]))])
        return path

    @classmethod
    def from_csv(cls, path, params: ChainParams) -> "SampleSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(params, data[:, 0].astype(np.int64), data[:, 1:4].copy())

    def manifest(self) -> dict:
        return {
            "params": asdict(self.params),
            "seed": self.params.seed,
            "chain_id": self.params.chain_id,
            "burnin_used": self.burnin_used,
            "wall_time": self.wall_time,
            "code_version": __version__,
        }

    def write_manifest(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return path


def default_burnin(cfg: Configuration, beta: float, rng: np.random.Generator,
                   window: int = 200, max_extra: int = 100_000) -> int:
    """Burn in for 10 n sweeps, then until the windowed mean of |S|^2/n settles.

    Returns the number of sweeps actually spent.
    """
    n = cfg.n
    _run_sweeps(cfg, beta, 10 * n, rng)
    spent = 10 * n
    prev = None
    while spent < 10 * n + max_extra:
        tr = _run_sweeps(cfg, beta, window, rng)
        spent += window
        cur = float(np.mean(np.einsum("ij,ij->i", tr, tr))) / n
        if prev is not None and abs(cur - prev) < 0.01 * max(abs(prev), 1e-12):
            break
        prev = cur
    return spent


def run_chain(params: ChainParams, keep_final: bool = False) -> SampleSeries:
    """Initialise uniformly, burn in, then record every ``thin``-th sweep."""
    t0 = time.perf_counter()
    rng = make_rng(params.seed, params.chain_id)
    cfg = init_uniform(params.n, rng)
    if params.burnin is None:
        burn = default_burnin(cfg, params.beta, rng)
        kept_sweeps = params.sweeps
    else:
        _run_sweeps(cfg, params.beta, params.burnin, rng)
        burn = params.burnin
        kept_sweeps = params.sweeps - params.burnin
    idx = np.arange(params.thin - 1, kept_sweeps, params.thin)
    S = np.empty((idx.size, 3))
    done = 0
    filled = 0
    chunk = max(params.thin, (BLOCK_UPDATES // params.n) // params.thin * params.thin)
    try:
        while done < kept_sweeps:
            m = min(chunk, kept_sweeps - done)
            tr = _run_sweeps(cfg, params.beta, m, rng)
            local = idx[(idx >= done) & (idx < done + m)] - done
            S[filled:filled + local.size] = tr[local]
            filled += local.size
            done += m
    except MemoryError as exc:
        partial = SampleSeries(params, burn + idx[:filled], S[:filled].copy(), burn)
        raise ChainRunError("chain ran out of memory", partial) from exc
    series = SampleSeries(params, burn + idx + 1, S, burn, time.perf_counter() - t0)
    if keep_final:
        series.final = cfg
    return series


def default_threads() -> int:
    import os

    env = os.environ.get("HEIS_MF_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_chains(params_list, threads: int | None = None, keep_final: bool = False):
    """Run independent chains on a thread pool; results keep input order."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(params_list) == 1:
        return [run_chain(p, keep_final) for p in params_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: run_chain(p, keep_final), params_list))


def chain_params(n, beta, sweeps, chains, seed, burnin=None, thin=1):
    return [ChainParams(n, beta, sweeps, burnin, thin, seed, cid) for cid in range(chains)]


def collect_snapshots(n: int, beta: float, count: int, spacing: int, burnin: int,
                      seed: int, chain_id: int = 0) -> list[Configuration]:
    """Stationary configurations ``spacing`` sweeps apart from one chain."""
    rng = make_rng(seed, chain_id)
    cfg = init_uniform(n, rng)
    _run_sweeps(cfg, beta, burnin, rng)
    out = []
    for _ in range(count):
        _run_sweeps(cfg, beta, spacing, rng)
        out.append(cfg.copy())
    return out


# ---------------------------------------------------------------- microcanonical


class BudgetExceededError(RuntimeError):
    pass


@dataclass
class MicrocanonicalSample:
    configurations: np.ndarray  # (count, n, 3)
    energies: np.ndarray
    acceptance_rate: float
    draws: int


def microcanonical_rejection_sample(n: int, u: float, r: float, count: int,
                                    rng: np.random.Generator, per_particle: bool = False,
                                    budget: int = 10_000_000,
                                    batch: int = 20_000) -> MicrocanonicalSample:
    """Uniform configurations conditioned on an energy window, by rejection.

    The window is ``[u - r, u + r]`` on H_n, or on H_n / n when
    ``per_particle`` is set.
    """
    if n > 30:
        raise ValueError("rejection sampling is limited to n <= 30")
    lo_u = -0.5 if per_particle else -n / 2.0
    if not (lo_u < u <= 0.0) or r <= 0:
        raise ValueError("need u in the energy domain and r > 0")
    kept, energies = [], []
    draws = 0
    accepted = 0
    hits = 0
    while accepted < count and draws < budget:
        m = min(batch, budget - draws)
        spins = uniform_spins((m, n), rng)
        S = spins.sum(axis=1)
        H = -np.einsum("ij,ij->i", S, S) / (2.0 * n)
        e = H / n if per_particle else H
        ok = np.abs(e - u) <= r
        draws += m
        hits += int(np.count_nonzero(ok))
        if ok.any():
            take = np.nonzero(ok)[0][: count - accepted]
            kept.append(spins[take])
            energies.append(e[take])
            accepted += take.size
    rate = hits / draws if draws else 0.0
    if accepted < count:
        if rate < 1e-6:
            raise BudgetExceededError(
                f"acceptance rate {rate:.3g} after {draws} draws is below 1e-6")
        warnings.warn(f"draw budget exhausted with {accepted}/{count} accepted")
    cfgs = np.concatenate(kept) if kept else np.empty((0, n, 3))
    en = np.concatenate(energies) if energies else np.empty(0)
    return MicrocanonicalSample(cfgs, en, rate, draws)


def acceptance_rate(n: int, u: float, r: float, draws: int, rng: np.random.Generator,
                    per_particle: bool = True, batch: int = 50_000) -> float:
    """Fraction of uniform configurations falling in the energy window."""
    hits = 0
    done = 0
    while done < draws:
        m = min(batch, draws - done)
        S = uniform_spins((m, n), rng).sum(axis=1)
        H = -np.einsum("ij,ij->i", S, S) / (2.0 * n)
        e = H / n if per_particle else H
        hits += int(np.count_nonzero(np.abs(e - u) <= r))
        done += m
    return hits / draws
