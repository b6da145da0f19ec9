"""Special functions and quadrature used by the analytical packet-loss formulas.

Everything here is scalar, pure and dependency-light. The incomplete gamma
functions follow the usual series / continued-fraction split and are kept in
log space so that large antenna counts do not overflow. The Gaussian tail is
delegated to ``scipy.special.erfc`` so scalar and array callers share one code
path bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000
_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances for :func:`adaptive_quad`."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_depth: int = 60

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be > 0, got {self.abs_tol}")
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_depth < 1:
            raise DomainError(f"max_depth must be >= 1, got {self.max_depth}")


# ============================================================================
#  Gaussian tail
# ============================================================================

def gaussian_q(x):
    """Standard normal tail probability Q(x) = P(N(0,1) > x).

    Accepts a scalar or an ndarray. Infinite inputs map to their limits
    (0 or 1); NaN raises :class:`DomainError`.
    """
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise DomainError("gaussian_q: NaN argument")
    out = 0.5 * special.erfc(arr / math.sqrt(2.0))
    if out.ndim == 0:
        return float(out)
    return out


# ============================================================================
#  Incomplete gamma functions
# ============================================================================

def _check_gamma_args(s: float, x: float) -> None:
    if not s > 0 or not math.isfinite(s):
        raise DomainError(f"incomplete gamma requires s > 0, got s={s}")
    if not x >= 0:
        raise DomainError(f"incomplete gamma requires x >= 0, got x={x}")


def _log_series(s: float, x: float) -> float:
    # log of gamma_lower(s, x), valid (and fast) for x < s + 1
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return -x + s * math.log(x) + math.log(total)
    raise ConvergenceError("incomplete gamma series did not converge", math.nan)


def _log_contfrac(s: float, x: float) -> float:
    # log of gamma_upper(s, x) by modified Lentz; valid for x >= s + 1
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return -x + s * math.log(x) + math.log(h)
    raise ConvergenceError("incomplete gamma continued fraction did not converge", math.nan)


def _log1mexp(a: float) -> float:
    """log(1 - exp(a)) for a <= 0."""
    if a > -math.log(2.0):
        return math.log(-math.expm1(a))
    return math.log1p(-math.exp(a))


def log_gamma_lower(s: float, x: float) -> float:
    """Natural log of the lower incomplete gamma function; -inf at x = 0."""
    _check_gamma_args(s, x)
    if x == 0.0:
        return -math.inf
    if math.isinf(x):
        return math.lgamma(s)
    if x < s + 1.0:
        return _log_series(s, x)
    lg = math.lgamma(s)
    return lg + _log1mexp(_log_contfrac(s, x) - lg)


def log_gamma_upper(s: float, x: float) -> float:
    """Natural log of the upper incomplete gamma function; -inf at x = inf."""
    _check_gamma_args(s, x)
    if x == 0.0:
        return math.lgamma(s)
    if math.isinf(x):
        return -math.inf
    if x >= s + 1.0:
        return _log_contfrac(s, x)
    lg = math.lgamma(s)
    return lg + _log1mexp(_log_series(s, x) - lg)


def gamma_lower(s: float, x: float) -> float:
    """Lower incomplete gamma function, integral of e^-t t^(s-1) over [0, x]."""
    return math.exp(log_gamma_lower(s, x))


def gamma_upper(s: float, x: float) -> float:
    """Upper incomplete gamma function, integral of e^-t t^(s-1) over [x, inf)."""
    return math.exp(log_gamma_upper(s, x))


def gamma_p(s: float, x: float) -> float:
    """Regularized lower incomplete gamma, i.e. the Gamma(s, 1) CDF at x."""
    return math.exp(log_gamma_lower(s, x) - math.lgamma(s))


def gamma_q(s: float, x: float) -> float:
    """Regularized upper incomplete gamma, 1 - :func:`gamma_p` without cancellation."""
    return math.exp(log_gamma_upper(s, x) - math.lgamma(s))


# ============================================================================
#  Quadrature
# ============================================================================

def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
    return h * (fa + 4.0 * fm + fb) / 6.0


def adaptive_quad(f: Callable[[float], float], a: float, b: float,
                  spec: QuadSpec = QuadSpec()) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]``.

    The interval is first cut into 8 panels; the sum of their Simpson
    estimates fixes the scale for the relative tolerance. Each panel is then
    bisected until the local Richardson error estimate drops below its share
    of ``max(abs_tol, rel_tol * |I|)``.

    Raises:
        ConvergenceError: if ``max_depth`` bisections are not enough. The
            exception carries the best available estimate.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("adaptive_quad needs finite limits")
    if b < a:
        raise DomainError(f"adaptive_quad needs a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0

    n0 = 8
    edges = [a + (b - a) * k / n0 for k in range(n0)] + [b]
    panels = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        panels.append((lo, hi, flo, fmid, fhi, _simpson(flo, fmid, fhi, hi - lo)))
    scale = abs(sum(p[5] for p in panels))
    tol = max(spec.abs_tol, spec.rel_tol * scale)

    total = 0.0
    converged = True
    # stack entries: (lo, hi, f(lo), f(mid), f(hi), whole, tol, depth)
    stack = [p + (tol / n0, 0) for p in panels]
    while stack:
        lo, hi, flo, fmid, fhi, whole, loc_tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = _simpson(flo, flm, fmid, mid - lo)
        right = _simpson(fmid, frm, fhi, hi - mid)
        err = left + right - whole
        if abs(err) <= 15.0 * loc_tol or depth >= spec.max_depth:
            if abs(err) > 15.0 * loc_tol:
                converged = False
            total += left + right + err / 15.0
            continue
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * loc_tol, depth + 1))
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * loc_tol, depth + 1))
    if not converged:
        raise ConvergenceError(
            f"adaptive_quad: max_depth={spec.max_depth} reached on [{a}, {b}]", total)
    return total


# ============================================================================
#  Incomplete beta
# ============================================================================

# incomplete beta values span many decades, so its default tolerance is purely relative
BETA_QUAD = QuadSpec(abs_tol=1e-300, rel_tol=1e-11)


def incomplete_beta(x: float, a: float, b: float, spec: QuadSpec = BETA_QUAD) -> float:
    """Incomplete beta integral B_x(a, b) along the real segment from 0 to x.

    ``b`` may be zero or negative and ``x`` may be negative, provided the
    integrand t^(a-1) (1-t)^(b-1) stays real and finite on the path. For
    integer ``a`` any real ``x < 1`` works; otherwise ``0 <= x < 1`` is
    required, and for ``a`` below the golden ratio the endpoint behaviour at 0
    is softened by the substitution t = x u^(1/a).

    Raises:
        DomainError: if the path hits the pole at t = 1 with b <= 1, or
            would need complex powers.
    """
    if not (math.isfinite(x) and math.isfinite(a) and math.isfinite(b)):
        raise DomainError("incomplete_beta: non-finite argument")
    if x == 0.0:
        return 0.0
    if x >= 1.0 and (b < 1.0 or x > 1.0):
        raise DomainError(f"incomplete_beta: path [0, {x}] reaches t=1 with b={b}")

    if float(a).is_integer() and a >= 1:
        k = int(a) - 1
        val = adaptive_quad(lambda t: t ** k * (1.0 - t) ** (b - 1.0), min(0.0, x), max(0.0, x), spec)
        return val if x > 0 else -val

    if x < 0 or a <= 0:
        raise DomainError(f"incomplete_beta: need a > 0 and x >= 0 for non-integer a, got a={a}, x={x}")
    if a >= _GOLDEN:
        # t^(a-1) is smoother at 0 than u^(1/a) once a - 1 >= 1/a
        return adaptive_quad(lambda t: t ** (a - 1.0) * (1.0 - t) ** (b - 1.0), 0.0, x, spec)
    pref = x ** a / a
    inv_a = 1.0 / a
    return pref * adaptive_quad(lambda u: (1.0 - x * u ** inv_a) ** (b - 1.0), 0.0, 1.0, spec)
