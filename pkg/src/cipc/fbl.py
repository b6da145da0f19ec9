"""Finite-blocklength decoding error: normal approximation and its linearization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfun import gaussian_q

LN2 = math.log(2.0)
LOG2E_SQ = math.log2(math.e) ** 2


@dataclass(frozen=True)
class LinearApprox:
    """Constants of the piecewise-linear error model.

    The error is 1 below ``alpha``, 0 above ``beta`` and falls with slope
    ``delta`` through 1/2 at ``gamma0 = 2^R - 1`` in between.
    """

    delta: float
    gamma0: float
    alpha: float
    beta: float

    def weights(self) -> tuple[float, float]:
        """Coefficients multiplying F(alpha) and F(beta) in the integrated form."""
        d, g0 = self.delta, self.gamma0
        return 0.5 - d * g0 + d * self.alpha, 0.5 + d * g0 - d * self.beta


def linear_approx_params(R: float, T: float) -> LinearApprox:
    """Linearization constants for rate ``R`` (bits/use) and blocklength ``T``.

    ``alpha`` is clamped at 0 since SINR is nonnegative. Blocklengths below
    100 give a warning because the normal approximation is loose there.
    """
    if not R > 0:
        raise DomainError(f"rate must be > 0, got {R}")
    if not T >= 1:
        raise DomainError(f"blocklength must be >= 1, got {T}")
    if T < 100:
        warnings.warn(f"blocklength T={T} < 100: normal approximation may be inaccurate",
                      stacklevel=2)
    delta = math.sqrt(T) / (2.0 * math.pi * math.sqrt(math.expm1(2.0 * R * LN2)))
    gamma0 = math.expm1(R * LN2)
    half_width = 1.0 / (2.0 * delta)
    return LinearApprox(delta=delta, gamma0=gamma0,
                        alpha=max(0.0, gamma0 - half_width), beta=gamma0 + half_width)


def omega(gamma: float, la: LinearApprox) -> float:
    """Piecewise-linear approximation of the decoding error at SINR ``gamma``."""
    if gamma <= la.alpha:
        return 1.0
    if gamma >= la.beta:
        return 0.0
    return 0.5 - la.delta * (gamma - la.gamma0)


def dispersion(gamma):
    """Channel dispersion of the AWGN channel, in bits^2."""
    g = np.asarray(gamma, dtype=float)
    return LOG2E_SQ * -np.expm1(-2.0 * np.log1p(g))


def normal_approx_argument(gamma, R: float, T: float):
    """Argument of the Q-function in the normal approximation.

    sqrt(T) (ln(1+g) - R ln2) / sqrt(1 - (1+g)^-2). The denominator is
    written with expm1/log1p so small ``g`` does not cancel; ``g = 0``
    gives -inf.
    """
    g = np.asarray(gamma, dtype=float)
    lg = np.log1p(g)
    with np.errstate(divide="ignore"):
        out = math.sqrt(T) * (lg - R * LN2) / np.sqrt(-np.expm1(-2.0 * lg))
    if out.ndim == 0:
        return float(out)
    return out


def decode_error_exact(gamma, R: float, T: float):
    """Normal-approximation decoding error probability at SINR ``gamma``.

    Works elementwise on arrays. Returns 1 at ``gamma = 0``.
    """
    return gaussian_q(normal_approx_argument(gamma, R, T))


def normal_approx_argument_slope(gamma, R: float, T: float):
    """Derivative of :func:`normal_approx_argument` with respect to SINR."""
    g = np.asarray(gamma, dtype=float)
    u2m1 = g * (2.0 + g)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = math.sqrt(T) * (1.0 - (np.log1p(g) - R * LN2) / u2m1) / np.sqrt(u2m1)
    if out.ndim == 0:
        return float(out)
    return out
