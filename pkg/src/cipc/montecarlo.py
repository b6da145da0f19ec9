"""Monte Carlo estimation of CIPC packet loss over Rayleigh fading.

Trials are indexed. The random numbers of trial ``i`` come from a Philox
counter-based generator keyed by the seed with its counter set to ``i * nt``;
one trial consumes exactly ``4 * nt`` raw 64-bit words (real and imaginary
parts of ``h_u`` and ``e``), i.e. ``nt`` Philox blocks. A trial's draw
therefore depends only on ``(seed, i)``, and any chunking of the trial range
reproduces the same numbers.

The per-trial loss is 1 when transmission is suspended and the
normal-approximation error f(A(gamma)) otherwise; averaging the conditional
error instead of sampling decode outcomes keeps the variance usable at
1e-7-level error rates.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import fbl
from .analytic import PHI_PERFECT, SystemParams
from .errors import DomainError

CHUNK_TRIALS = 1 << 15
_SQRT_HALF = math.sqrt(0.5)
_U53 = 2.0 ** -53


@dataclass(frozen=True)
class ChannelDraw:
    """One fading realization: x = ||h_u||^2 and y = |e^T h_u^*|^2 / ||h_u||^2."""

    x: float
    y: float

    @property
    def z(self) -> float:
        return self.y / self.x


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate of the packet-loss breakdown.

    ``stderr`` is the standard error of ``p_loss_hat``. ``eps_cond_hat`` is NaN
    when no trial transmitted.
    """

    p_loss_hat: float
    p_t_hat: float
    eps_cond_hat: float
    stderr: float
    n_trials: int
    seed: int
    n_transmit: int
    eps_cond_stderr: float


# ============================================================================
#  Trial-indexed random streams
# ============================================================================

def _raw_to_normal(raw: np.ndarray) -> np.ndarray:
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return special.ndtri(u) * _SQRT_HALF


def trial_generator(seed: int, trial: int, nt: int) -> np.random.Generator:
    """Generator positioned at the first word of trial ``trial``."""
    return np.random.Generator(np.random.Philox(key=seed, counter=trial * nt))


def draw_channel(rng: np.random.Generator, nt: int) -> ChannelDraw:
    """Draw one (h_u, e) pair with i.i.d. CN(0, 1) entries and reduce it to (x, y).

    Consumes ``4 * nt`` raw words from ``rng``'s bit generator.
    """
    if nt < 1:
        raise DomainError(f"nt must be >= 1, got {nt}")
    g = _raw_to_normal(rng.bit_generator.random_raw(4 * nt))
    h = g[:nt] + 1j * g[nt:2 * nt]
    e = g[2 * nt:3 * nt] + 1j * g[3 * nt:]
    x = float(np.sum(h.real ** 2 + h.imag ** 2))
    proj = np.sum(e * np.conj(h))
    return ChannelDraw(x=x, y=float((proj.real ** 2 + proj.imag ** 2) / x))


def draw_channels(seed: int, start: int, count: int, nt: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`draw_channel` for trials ``start .. start + count - 1``."""
    raw = np.random.Philox(key=seed, counter=start * nt).random_raw(4 * nt * count)
    g = _raw_to_normal(raw).reshape(count, 4, nt)
    hr, hi, er, ei = g[:, 0], g[:, 1], g[:, 2], g[:, 3]
    x = np.sum(hr * hr + hi * hi, axis=1)
    # e^T h^* = sum (er + i ei)(hr - i hi)
    re = np.sum(er * hr + ei * hi, axis=1)
    im = np.sum(ei * hr - er * hi, axis=1)
    return x, (re * re + im * im) / x


def realized_sinr(x, y, p: SystemParams):
    """SINR of one or many realizations; Q / sigma2 for perfect reciprocity."""
    if p.phi >= PHI_PERFECT:
        return np.full(np.shape(x), p.q / p.sigma2) if np.ndim(x) else p.q / p.sigma2
    return p.phi * p.q / ((1.0 - p.phi) * p.q * (y / x) + p.sigma2)


# ============================================================================
#  Estimator
# ============================================================================

@dataclass(frozen=True)
class _ChunkStats:
    n: int
    mean: float
    m2: float
    lo: float
    hi: float
    n_tx: int
    tx_mean: float
    tx_m2: float


def _moments(v: np.ndarray) -> tuple[float, float]:
    if v.size == 0:
        return 0.0, 0.0
    if v.min() == v.max():
        return float(v[0]), 0.0
    mean = float(np.mean(v))
    return mean, float(np.sum((v - mean) ** 2))


def _merge(n_a: int, mean_a: float, m2_a: float, n_b: int, mean_b: float, m2_b: float):
    if n_a == 0:
        return n_b, mean_b, m2_b
    if n_b == 0:
        return n_a, mean_a, m2_a
    n = n_a + n_b
    d = mean_b - mean_a
    mean = mean_a + d * n_b / n
    return n, mean, m2_a + m2_b + d * d * n_a * n_b / n


def _chunk(p: SystemParams, seed: int, start: int, count: int, kernel: str) -> _ChunkStats:
    x, y = draw_channels(seed, start, count, p.nt)
    tx = x >= p.x_threshold
    n_tx = int(np.count_nonzero(tx))
    if p.phi >= PHI_PERFECT:
        g = p.q / p.sigma2
        err = np.full(n_tx, _kernel_value(g, p, kernel))
    else:
        err = _kernel_array(realized_sinr(x[tx], y[tx], p), p, kernel)
    loss = np.ones(count)
    loss[tx] = err
    mean, m2 = _moments(loss)
    tx_mean, tx_m2 = _moments(err)
    return _ChunkStats(count, mean, m2, float(loss.min()), float(loss.max()), n_tx, tx_mean, tx_m2)


def _kernel_value(g: float, p: SystemParams, kernel: str) -> float:
    if kernel == "exact":
        return float(fbl.decode_error_exact(g, p.R, p.T))
    return fbl.omega(g, fbl.linear_approx_params(p.R, p.T))


def _kernel_array(g: np.ndarray, p: SystemParams, kernel: str) -> np.ndarray:
    if kernel == "exact":
        return np.asarray(fbl.decode_error_exact(g, p.R, p.T), dtype=float).reshape(g.shape)
    la = fbl.linear_approx_params(p.R, p.T)
    out = 0.5 - la.delta * (g - la.gamma0)
    out = np.where(g <= la.alpha, 1.0, out)
    return np.where(g >= la.beta, 0.0, out)


def _chunk_args(p, seed, n_trials, kernel, chunk_size):
    for start in range(0, n_trials, chunk_size):
        yield p, seed, start, min(chunk_size, n_trials - start), kernel


def _run_chunk(args) -> _ChunkStats:
    return _chunk(*args)


def simulate_packet_loss(p: SystemParams, n_trials: int = 1_000_000, seed: int = 0,
                         workers: int = 1, kernel: str = "exact",
                         chunk_size: int = CHUNK_TRIALS) -> McEstimate:
    """Estimate packet loss, transmission probability and conditional error.

    Args:
        p: scenario.
        n_trials: number of channel realizations.
        seed: 64-bit key of the counter-based generator.
        workers: process count; results do not depend on it.
        kernel: ``"exact"`` records f(A(gamma)); ``"linear"`` records the
            piecewise-linear model instead, which isolates the SINR
            distribution from the linearization when comparing with the
            closed forms.
        chunk_size: trials per work unit. Part of the reduction order, so it
            must match between runs that are expected to agree bit for bit.
    """
    if n_trials < 1:
        raise DomainError(f"n_trials must be >= 1, got {n_trials}")
    if kernel not in ("exact", "linear"):
        raise DomainError(f"unknown kernel {kernel!r}")
    if not 0 <= seed < 2 ** 64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    jobs = list(_chunk_args(p, seed, n_trials, kernel, chunk_size))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(_run_chunk, jobs))
    else:
        stats = [_run_chunk(j) for j in jobs]

    n, mean, m2 = 0, 0.0, 0.0
    tn, tmean, tm2 = 0, 0.0, 0.0
    lo, hi = math.inf, -math.inf
    for s in stats:
        n, mean, m2 = _merge(n, mean, m2, s.n, s.mean, s.m2)
        tn, tmean, tm2 = _merge(tn, tmean, tm2, s.n_tx, s.tx_mean, s.tx_m2)
        lo, hi = min(lo, s.lo), max(hi, s.hi)

    if lo == hi:
        # every trial recorded the same loss
        mean, stderr = lo, 0.0
    else:
        stderr = math.sqrt(m2 / (n - 1) / n) if n > 1 else math.nan
    if tn == 0:
        eps, eps_se = math.nan, math.nan
    else:
        eps = tmean
        eps_se = math.sqrt(tm2 / (tn - 1) / tn) if tn > 1 else math.nan
        if tm2 == 0.0:
            eps_se = 0.0
    return McEstimate(p_loss_hat=mean, p_t_hat=tn / n, eps_cond_hat=eps, stderr=stderr,
                      n_trials=n, seed=seed, n_transmit=tn, eps_cond_stderr=eps_se)


def empirical_sinr_cdf(p: SystemParams, points, n_trials: int = 1_000_000,
                       seed: int = 0) -> np.ndarray:
    """Fraction of transmitting trials whose SINR is <= each of ``points``."""
    pts = np.asarray(points, dtype=float)
    counts = np.zeros(pts.shape, dtype=np.int64)
    n_tx = 0
    for _, _, start, count, _ in _chunk_args(p, seed, n_trials, "exact", CHUNK_TRIALS):
        x, y = draw_channels(seed, start, count, p.nt)
        tx = x >= p.x_threshold
        g = np.sort(realized_sinr(x[tx], y[tx], p))
        n_tx += g.size
        counts += np.searchsorted(g, pts, side="right")
    return counts / n_tx
