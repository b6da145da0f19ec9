"""Packet-loss probabilities of channel inversion power control (CIPC).

Three regimes are covered:

* truncated CIPC with imperfect reciprocity (0 < phi < 1, finite Pmax),
* conventional CIPC (Pmax = inf), with a closed form through the
  incomplete beta function cross-checked against quadrature,
* truncated CIPC with perfect reciprocity (phi = 1), where the SINR is
  deterministic.

All decoding errors use the piecewise-linear model of :mod:`cipc.fbl`, except
:func:`cond_decoding_error_exact`, which integrates the exact normal
approximation against the conditional SINR distribution and exists to
measure how much the linearization costs.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Callable

from . import fbl
from .errors import DomainError
from .specfun import (QuadSpec, adaptive_quad, gamma_p, gamma_q, incomplete_beta,
                      log_gamma_upper)

PHI_PERFECT = 1.0 - 1e-9
ROOT_RTOL = 1e-10
ROOT_MAXITER = 200

# probabilities down to ~1e-40 matter for large antenna counts, so the
# absolute floor is effectively off
ANALYTIC_QUAD = QuadSpec(abs_tol=1e-300, rel_tol=1e-9, max_depth=50)


@dataclass(frozen=True)
class SystemParams:
    """One CIPC scenario.

    Attributes:
        nt: number of BS antennas.
        phi: channel reciprocity coefficient in [0, 1].
        T: blocklength in channel uses.
        R: rate in bits per channel use.
        pmax: maximum transmit power (linear, relative to the noise
            normalization); ``math.inf`` selects conventional CIPC.
        sigma2: noise variance.
        q: target received signal power Q.
    """

    nt: int
    phi: float
    T: float
    R: float
    pmax: float
    sigma2: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if int(self.nt) != self.nt or self.nt < 1:
            raise DomainError(f"nt must be an integer >= 1, got {self.nt}")
        object.__setattr__(self, "nt", int(self.nt))
        if not 0.0 <= self.phi <= 1.0:
            raise DomainError(f"phi must lie in [0, 1], got {self.phi}")
        if not self.T >= 1:
            raise DomainError(f"T must be >= 1, got {self.T}")
        if not self.R > 0:
            raise DomainError(f"R must be > 0, got {self.R}")
        if not self.pmax > 0:
            raise DomainError(f"pmax must be > 0 (or inf), got {self.pmax}")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise DomainError(f"sigma2 must be finite and > 0, got {self.sigma2}")
        if not (self.q > 0 and math.isfinite(self.q)):
            raise DomainError(f"q must be finite and > 0, got {self.q}")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def x_threshold(self) -> float:
        """Channel gain below which transmission is suspended, Q / Pmax."""
        return self.q / self.pmax


@dataclass(frozen=True)
class LossBreakdown:
    """Transmission probability, conditional decoding error and packet loss."""

    p_t: float
    eps_cond: float
    p_loss: float


def _assemble(p_t: float, p_suspend: float, eps: float) -> LossBreakdown:
    # p_suspend is computed directly rather than as 1 - p_t to keep tiny losses accurate
    p_loss = min(1.0, max(0.0, eps * p_t + p_suspend))
    return LossBreakdown(p_t=p_t, eps_cond=eps, p_loss=p_loss)


def select_scheme(p: SystemParams) -> str:
    """Which closed form applies: ``perfect``, ``conventional`` or ``truncated``."""
    if p.phi >= PHI_PERFECT:
        return "perfect"
    if math.isinf(p.pmax):
        return "conventional"
    return "truncated"


# ============================================================================
#  SINR distribution
# ============================================================================

def sinr_ceiling(p: SystemParams) -> float:
    """Supremum of the per-realization SINR, phi Q / sigma2."""
    return p.phi * p.q / p.sigma2


def _check_imperfect(p: SystemParams) -> None:
    if not 0.0 < p.phi < 1.0:
        raise DomainError(f"requires 0 < phi < 1, got phi={p.phi}")


def xi(gamma: float, p: SystemParams) -> float:
    """(Q phi - gamma sigma2) / (Q gamma (1 - phi)); positive below the SINR ceiling."""
    _check_imperfect(p)
    if not gamma > 0:
        raise DomainError(f"xi requires gamma > 0, got {gamma}")
    return (p.q * p.phi - gamma * p.sigma2) / (p.q * gamma * (1.0 - p.phi))


def _cdf_function(p: SystemParams) -> Callable[[float], float]:
    """Return gamma -> F(gamma | X >= Q/Pmax) with the truncation constants precomputed."""
    _check_imperfect(p)
    nt = p.nt
    ceiling = sinr_ceiling(p)
    x0 = p.x_threshold
    qa = p.q * p.phi
    qb = p.q * (1.0 - p.phi)
    s2 = p.sigma2
    log_den = log_gamma_upper(nt, x0) if x0 > 0 else 0.0

    def cdf(gamma: float) -> float:
        if gamma <= 0.0:
            return 0.0
        if gamma >= ceiling:
            return 1.0
        z = 1.0 + (qa - gamma * s2) / (qb * gamma)
        log_f = -nt * math.log(z)
        if x0 > 0:
            log_f += log_gamma_upper(nt, x0 * z) - log_den
        return min(1.0, math.exp(log_f))

    return cdf


def cond_sinr_cdf(gamma: float, p: SystemParams) -> float:
    """CDF of the SINR conditioned on the BS transmitting (imperfect reciprocity)."""
    return _cdf_function(p)(gamma)


def transmission_prob(p: SystemParams) -> float:
    """Probability that ||h_u||^2 clears Q / Pmax."""
    if math.isinf(p.pmax):
        return 1.0
    return gamma_q(p.nt, p.x_threshold)


def suspension_prob(p: SystemParams) -> float:
    """1 - :func:`transmission_prob`, evaluated without cancellation."""
    if math.isinf(p.pmax):
        return 0.0
    return gamma_p(p.nt, p.x_threshold)


# ============================================================================
#  Linearized decoding error and packet loss
# ============================================================================

def _integral_of_cdf(cdf, lo: float, hi: float, ceiling: float, spec: QuadSpec) -> float:
    top = min(hi, ceiling)
    val = adaptive_quad(cdf, lo, top, spec) if top > lo else 0.0
    # F == 1 above the ceiling
    return val + max(0.0, hi - max(top, lo))


def cond_decoding_error(p: SystemParams, spec: QuadSpec = ANALYTIC_QUAD) -> float:
    """Linearized decoding error conditioned on transmission, for 0 <= phi < 1.

    Raises:
        ConvergenceError: if the integral of the CDF fails to converge.
    """
    la = fbl.linear_approx_params(p.R, p.T)
    ceiling = sinr_ceiling(p)
    if ceiling <= la.alpha:
        return 1.0
    cdf = _cdf_function(p)
    w_a, w_b = la.weights()
    integral = _integral_of_cdf(cdf, la.alpha, la.beta, ceiling, spec)
    eps = w_a * cdf(la.alpha) + w_b * cdf(la.beta) + la.delta * integral
    return min(1.0, max(0.0, eps))


def packet_loss_truncated(p: SystemParams, spec: QuadSpec = ANALYTIC_QUAD) -> LossBreakdown:
    """Packet loss of truncated CIPC with imperfect reciprocity."""
    if p.phi >= PHI_PERFECT:
        raise DomainError("phi = 1 is handled by packet_loss_perfect")
    return _assemble(transmission_prob(p), suspension_prob(p), cond_decoding_error(p, spec))


def _conventional_m(p: SystemParams) -> tuple[float, float] | None:
    den = p.q * (1.0 - p.phi) - p.sigma2
    if den == 0.0:
        return None
    return p.q * (1.0 - p.phi) / den, p.q * p.phi / den


def conventional_integral(p: SystemParams, spec: QuadSpec = ANALYTIC_QUAD) -> tuple[float, float | None]:
    """Integral of the unconditioned SINR CDF over [alpha, beta], two ways.

    Returns ``(quadrature, beta_form)``. The beta form writes the part below
    the SINR ceiling as M1^N (-1)^N M2 (B_{-a/M2}(1+N, 1-N) - B_{-b/M2}(1+N, 1-N))
    and adds the clamped remainder; it is ``None`` when M1, M2 are undefined
    or the incomplete beta path is not real.
    """
    _check_imperfect(p)
    la = fbl.linear_approx_params(p.R, p.T)
    ceiling = sinr_ceiling(p)
    pinf = p.replace(pmax=math.inf)
    quad = _integral_of_cdf(_cdf_function(pinf), la.alpha, la.beta, ceiling, spec)

    m = _conventional_m(p)
    if m is None:
        return quad, None
    m1, m2 = m
    nt = p.nt
    lo = la.alpha
    top = min(la.beta, ceiling)
    if top <= lo:
        return quad, max(0.0, la.beta - lo)
    beta_spec = QuadSpec(abs_tol=spec.abs_tol, rel_tol=min(spec.rel_tol, 1e-11),
                         max_depth=spec.max_depth)
    try:
        b_lo = incomplete_beta(-lo / m2, 1.0 + nt, 1.0 - nt, beta_spec)
        b_hi = incomplete_beta(-top / m2, 1.0 + nt, 1.0 - nt, beta_spec)
    except DomainError:
        return quad, None
    beta_form = m1 ** nt * (-1.0) ** nt * m2 * (b_lo - b_hi) + max(0.0, la.beta - top)
    return quad, beta_form


def packet_loss_conventional(p: SystemParams, spec: QuadSpec = ANALYTIC_QUAD,
                             cross_check: bool = True) -> float:
    """Packet loss of conventional CIPC (no power cap), 0 < phi < 1.

    The CDF integral is taken by quadrature. With ``cross_check`` the
    incomplete-beta form is evaluated too and a warning is issued if the two
    differ by more than 1e-6 relative.
    """
    la = fbl.linear_approx_params(p.R, p.T)
    ceiling = sinr_ceiling(p)
    if ceiling <= la.alpha:
        return 1.0
    pinf = p.replace(pmax=math.inf)
    cdf = _cdf_function(pinf)
    if cross_check:
        integral, beta_form = conventional_integral(p, spec)
        if beta_form is not None and abs(beta_form - integral) > 1e-6 * abs(integral):
            warnings.warn(f"conventional CIPC: beta form {beta_form!r} disagrees with "
                          f"quadrature {integral!r}", RuntimeWarning, stacklevel=2)
    else:
        integral = _integral_of_cdf(cdf, la.alpha, la.beta, ceiling, spec)
    w_a, w_b = la.weights()
    eps = w_a * cdf(la.alpha) + w_b * cdf(la.beta) + la.delta * integral
    return min(1.0, max(0.0, eps))


def packet_loss_perfect(p: SystemParams) -> LossBreakdown:
    """Packet loss of truncated CIPC with perfect reciprocity (SNR = Q / sigma2)."""
    if p.phi < PHI_PERFECT:
        raise DomainError(f"packet_loss_perfect requires phi = 1, got {p.phi}")
    eps = float(fbl.decode_error_exact(p.q / p.sigma2, p.R, p.T))
    return _assemble(transmission_prob(p), suspension_prob(p), eps)


def packet_loss(p: SystemParams, spec: QuadSpec = ANALYTIC_QUAD) -> LossBreakdown:
    """Route to the closed form matching ``p`` (see :func:`select_scheme`)."""
    scheme = select_scheme(p)
    if scheme == "perfect":
        return packet_loss_perfect(p)
    if scheme == "conventional":
        eps = packet_loss_conventional(p, spec, cross_check=False)
        return LossBreakdown(p_t=1.0, eps_cond=eps, p_loss=eps)
    return packet_loss_truncated(p, spec)


# ============================================================================
#  Exact-kernel reference
# ============================================================================

_A_BREAKS = (-38.0, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0, 38.0)


def _sinr_at_argument(target: float, R: float, T: float, hi: float) -> float:
    """SINR in (0, hi] where the normal-approximation argument equals ``target``."""
    lo_g, hi_g = 0.0, hi
    if fbl.normal_approx_argument(hi_g, R, T) <= target:
        return hi_g
    for _ in range(ROOT_MAXITER):
        mid = 0.5 * (lo_g + hi_g)
        if fbl.normal_approx_argument(mid, R, T) < target:
            lo_g = mid
        else:
            hi_g = mid
        if hi_g - lo_g <= 1e-13 * hi_g:
            break
    return 0.5 * (lo_g + hi_g)


def cond_decoding_error_exact(p: SystemParams, spec: QuadSpec = ANALYTIC_QUAD) -> float:
    """Conditional decoding error with the exact normal-approximation kernel.

    Integrates f(A(gamma)) against the conditional SINR distribution by parts,
    f(A(c)) + integral_0^c F(gamma) pdf_N(A(gamma)) A'(gamma) dgamma with c the
    SINR ceiling, split where A crosses a fixed set of levels so the peak
    around 2^R - 1 is always resolved.
    """
    _check_imperfect(p)
    c = sinr_ceiling(p)
    cdf = _cdf_function(p)
    inv_sqrt_2pi = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(g: float) -> float:
        if g <= 0.0:
            return 0.0
        a = fbl.normal_approx_argument(g, p.R, p.T)
        return cdf(g) * inv_sqrt_2pi * math.exp(-0.5 * a * a) * fbl.normal_approx_argument_slope(g, p.R, p.T)

    pts = sorted({0.0, c, *(_sinr_at_argument(a, p.R, p.T, c) for a in _A_BREAKS)})
    total = sum(adaptive_quad(integrand, a, b, spec) for a, b in zip(pts[:-1], pts[1:]) if b > a)
    eps = float(fbl.decode_error_exact(c, p.R, p.T)) + total
    return min(1.0, max(0.0, eps))


# ============================================================================
#  Bounds on Q
# ============================================================================

def q_hard_bound(p: SystemParams) -> float:
    """Upper limit Pmax (Nt - 1) on useful Q; ``inf`` when nt == 1 (no bound)."""
    if p.nt == 1:
        return math.inf
    return p.pmax * (p.nt - 1)


def q_up_from_target(p: SystemParams, target: float) -> float:
    """Largest Q whose suspension probability does not exceed ``target``.

    Solves P(Nt, Q/Pmax) = target by geometric bisection to 1e-10 relative.
    """
    if not 0.0 < target < 1.0:
        raise DomainError(f"target must lie in (0, 1), got {target}")
    if math.isinf(p.pmax):
        return math.inf
    nt = p.nt
    hi = 1.0
    while gamma_p(nt, hi) < target:
        hi *= 2.0
    lo = hi / 2.0
    while gamma_p(nt, lo) >= target:
        lo /= 2.0
    for _ in range(ROOT_MAXITER):
        mid = math.sqrt(lo * hi)
        if gamma_p(nt, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 <= ROOT_RTOL:
            break
    return p.pmax * math.sqrt(lo * hi)


def _convexity_residual(g: float) -> float:
    return math.log1p(g) / (g * (2.0 + g)) - 1.0 / 3.0


def sinr_convexity_root() -> float:
    """Root of ln(1+g) / ((1+g)^2 - 1) = 1/3."""
    lo, hi = 1e-6, 10.0
    for _ in range(ROOT_MAXITER):
        mid = 0.5 * (lo + hi)
        if _convexity_residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return 0.5 * (lo + hi)


def q0_convexity(sigma2: float) -> float:
    """Left edge Q0 = sigma2 * g_a of the region where the phi = 1 loss is convex in Q."""
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be > 0, got {sigma2}")
    return sigma2 * sinr_convexity_root()
