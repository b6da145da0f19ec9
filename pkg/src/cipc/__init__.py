"""Packet-loss analysis of truncated channel inversion power control for one-way URLLC."""

__version__ = "0.1.0"

from .analytic import (
    LossBreakdown,
    SystemParams,
    cond_decoding_error,
    cond_decoding_error_exact,
    cond_sinr_cdf,
    packet_loss,
    packet_loss_conventional,
    packet_loss_perfect,
    packet_loss_truncated,
    q0_convexity,
    q_hard_bound,
    q_up_from_target,
)
from .errors import CipcError, ConvergenceError, DomainError
from .montecarlo import McEstimate, simulate_packet_loss
from .optimize import Infeasible, OptResult, SearchSpec, max_rate, min_pmax, minimize_packet_loss_q, sweep

__all__ = [
    "CipcError", "ConvergenceError", "DomainError", "Infeasible", "LossBreakdown", "McEstimate",
    "OptResult", "SearchSpec", "SystemParams", "cond_decoding_error", "cond_decoding_error_exact",
    "cond_sinr_cdf", "max_rate", "min_pmax", "minimize_packet_loss_q", "packet_loss",
    "packet_loss_conventional", "packet_loss_perfect", "packet_loss_truncated", "q0_convexity",
    "q_hard_bound", "q_up_from_target", "simulate_packet_loss", "sweep",
]
