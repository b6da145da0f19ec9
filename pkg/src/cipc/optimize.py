"""Scalar searches over Q, R and Pmax, and parameter sweeps built on them."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import analytic as an
from . import fbl
from .analytic import LossBreakdown, SystemParams
from .errors import CipcError, DomainError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
# lowest Q in the scan, relative to the top of the search interval
Q_SPAN = 1e-6


@dataclass(frozen=True)
class SearchSpec:
    grid_points: int = 400
    refine_tol: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if self.grid_points < 10:
            raise DomainError(f"grid_points must be >= 10, got {self.grid_points}")
        if not self.refine_tol > 0:
            raise DomainError(f"refine_tol must be > 0, got {self.refine_tol}")


@dataclass(frozen=True)
class OptResult:
    """Minimizer of the packet loss over Q.

    ``method`` is ``grid+golden``, ``derivative-root`` or ``boundary`` (the
    optimum sits on an end of ``interval``).
    """

    q_star: float
    p_loss_star: float
    interval: tuple[float, float]
    method: str
    breakdown: LossBreakdown


@dataclass(frozen=True)
class Infeasible:
    """Returned instead of a value when a target cannot be met."""

    reason: str
    best: float = math.nan

    def __bool__(self):
        return False


# ============================================================================
#  One-dimensional helpers
# ============================================================================

def golden_section(f: Callable[[float], float], a: float, b: float,
                   tol: float, max_iter: int) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on [a, b]; returns ``(x, f(x))``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _search_interval(p: SystemParams, target: float | None) -> tuple[float, float]:
    hard = an.q_hard_bound(p)
    hi = min(hard, an.q_up_from_target(p, target)) if target is not None else hard
    if math.isinf(hi):
        if math.isinf(p.pmax):
            raise DomainError("conventional CIPC loss decreases in Q without bound; no finite optimum")
        # nt == 1 without a target: suspension probability exceeds 1 - 1e-21 beyond 50 Pmax
        hi = 50.0 * p.pmax
    if hi == hard:
        # keep q_star strictly below Pmax (Nt - 1)
        hi = math.nextafter(hi, 0.0) * (1.0 - 1e-12)
    return hi * Q_SPAN, hi


def perfect_loss_slope(p: SystemParams) -> float:
    """dP/dQ of the phi = 1 packet loss, from its closed-form derivative."""
    g = p.q / p.sigma2
    eps = float(fbl.decode_error_exact(g, p.R, p.T))
    a = fbl.normal_approx_argument(g, p.R, p.T)
    deps = -math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi) \
        * fbl.normal_approx_argument_slope(g, p.R, p.T) / p.sigma2
    if math.isinf(p.pmax):
        return deps
    x = p.x_threshold
    dpt = -math.exp(-x + (p.nt - 1) * math.log(x) - math.lgamma(p.nt)) / p.pmax
    return dpt * (eps - 1.0) + an.transmission_prob(p) * deps


def _derivative_root(p: SystemParams, lo: float, hi: float, s: SearchSpec) -> float:
    # slope increases on the convex region, so bisect on its sign
    slope = lambda q: perfect_loss_slope(p.replace(q=q))
    if slope(lo) >= 0.0:
        return lo
    if slope(hi) <= 0.0:
        return hi
    for _ in range(s.max_iter):
        mid = math.sqrt(lo * hi)
        if slope(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 <= s.refine_tol:
            break
    return math.sqrt(lo * hi)


# ============================================================================
#  Optimal Q
# ============================================================================

def minimize_packet_loss_q(p: SystemParams, target: float | None = None,
                           s: SearchSpec = SearchSpec(),
                           convex_method: str = "golden") -> OptResult:
    """Minimize packet loss over Q in (0, min(Pmax (Nt-1), Q_up)].

    For phi < 1 a log-spaced grid scan locates the best bracket, refined by
    golden section in log Q. For phi = 1 the loss is convex on
    (Q0, Pmax (Nt-1)); that region is searched directly (golden section, or
    the sign change of the closed-form derivative with
    ``convex_method="derivative-root"``) and compared with a scan of (0, Q0].
    ``target``, when given, also caps Q by the suspension-probability limit.
    """
    lo, hi = _search_interval(p, target)
    cache: dict[float, LossBreakdown] = {}

    def loss(q: float) -> float:
        if q not in cache:
            cache[q] = an.packet_loss(p.replace(q=q))
        return cache[q].p_loss

    logf = lambda t: loss(math.exp(t))

    def best_of(cands: list[tuple[float, str]]) -> OptResult:
        q, method = min(cands, key=lambda c: (loss(c[0]), c[0]))
        if q <= lo or q >= hi:
            method = "boundary"
        return OptResult(q, cache[q].p_loss, (lo, hi), method, cache[q])

    if an.select_scheme(p) == "perfect":
        q0 = an.q0_convexity(p.sigma2)
        cands: list[tuple[float, str]] = []
        if q0 < hi:
            if convex_method == "derivative-root":
                cands.append((_derivative_root(p, q0, hi, s), "derivative-root"))
            else:
                t, _ = golden_section(logf, math.log(q0), math.log(hi), s.refine_tol, s.max_iter)
                cands.append((math.exp(t), "grid+golden"))
            cands.append((hi, "boundary"))
        top = min(q0, hi)
        if lo < top:
            cands += [(float(q), "grid+golden") for q in np.geomspace(lo, top, s.grid_points)]
        return best_of(cands)

    grid = np.geomspace(lo, hi, s.grid_points)
    vals = [loss(float(q)) for q in grid]
    i = int(np.argmin(vals))
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    t, _ = golden_section(logf, math.log(a), math.log(b), s.refine_tol, s.max_iter)
    return best_of([(math.exp(t), "grid+golden"), (float(grid[i]), "grid+golden")])


# ============================================================================
#  Rate and power requirements
# ============================================================================

def default_rate_ceiling(p: SystemParams) -> float:
    """log2(1 + phi Q / sigma2): no rate above it is supported even error-free."""
    return math.log2(1.0 + an.sinr_ceiling(p))


def max_rate(p: SystemParams, target: float, r_hi: float | None = None,
             rtol: float = 1e-12, max_iter: int = 200) -> float:
    """Largest rate whose packet loss at the given Q stays at or below ``target``.

    Bisection on R, valid because the loss increases with R. Returns 0.0
    when even a vanishing rate misses the target.
    """
    if not 0.0 < target < 1.0:
        raise DomainError(f"target must lie in (0, 1), got {target}")
    if r_hi is None:
        r_hi = default_rate_ceiling(p)
    if not r_hi > 0:
        return 0.0
    f = lambda r: an.packet_loss(p.replace(R=r)).p_loss
    lo = r_hi * 1e-9
    if f(lo) > target:
        return 0.0
    hi = r_hi
    if f(hi) <= target:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if f(mid) <= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return lo


def min_loss_over_q(p: SystemParams, s: SearchSpec = SearchSpec()) -> float:
    return minimize_packet_loss_q(p, None, s).p_loss_star


def min_pmax(p: SystemParams, target: float, pmax_hi: float,
             pmax_lo: float | None = None, s: SearchSpec = SearchSpec(),
             rtol: float = 1e-4, max_iter: int = 200) -> float | Infeasible:
    """Smallest Pmax whose Q-optimized packet loss meets ``target``.

    Geometric bisection over [pmax_lo, pmax_hi] (default ``pmax_lo`` is
    ``pmax_hi * 1e-6``), using that the optimized loss does not increase with
    Pmax. Returns :class:`Infeasible` if ``pmax_hi`` is not enough.
    """
    if pmax_lo is None:
        pmax_lo = pmax_hi * 1e-6
    if not 0 < pmax_lo < pmax_hi:
        raise DomainError(f"need 0 < pmax_lo < pmax_hi, got {pmax_lo}, {pmax_hi}")
    if target >= 1.0:
        return pmax_lo
    g = lambda pm: min_loss_over_q(p.replace(pmax=pm), s)
    best = g(pmax_hi)
    if best > target:
        return Infeasible(f"min packet loss {best:.6e} at pmax={pmax_hi!r} exceeds target {target!r}",
                          best)
    lo, hi = pmax_lo, pmax_hi
    if g(lo) <= target:
        return lo
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        if g(mid) <= target:
            hi = mid
        else:
            lo = mid
        if hi / lo - 1.0 <= rtol:
            break
    return hi


# ============================================================================
#  Sweeps
# ============================================================================

SWEEP_FIELDS = {"Q": "q", "T": "T", "phi": "phi", "Nt": "nt", "Pmax": "pmax", "R": "R"}
OBJECTIVE_COLUMNS = {
    "loss": ("scheme", "p_t", "eps_cond", "p_loss"),
    "min-loss-over-Q": ("q_star", "p_loss_star", "p_t", "eps_cond", "method"),
    "max-rate": ("max_rate",),
}


@dataclass
class SweepTable:
    """Rows in grid order; ``error`` is empty unless that point failed."""

    variable: str
    objective: str
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


def _sweep_point(args) -> dict:
    p, variable, value, objective, target, s = args
    row = {variable: value, "error": ""}
    try:
        q = p.replace(**{SWEEP_FIELDS[variable]: value})
        if objective == "loss":
            lb = an.packet_loss(q)
            row.update(scheme=an.select_scheme(q), p_t=lb.p_t, eps_cond=lb.eps_cond, p_loss=lb.p_loss)
        elif objective == "min-loss-over-Q":
            r = minimize_packet_loss_q(q, target, s)
            row.update(q_star=r.q_star, p_loss_star=r.p_loss_star, p_t=r.breakdown.p_t,
                       eps_cond=r.breakdown.eps_cond, method=r.method)
        else:
            row.update(max_rate=max_rate(q, target))
    except (CipcError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(p: SystemParams, variable: str, grid: Sequence[float], objective: str = "loss",
          target: float | None = None, s: SearchSpec = SearchSpec(),
          workers: int = 1) -> SweepTable:
    """Evaluate ``objective`` with ``variable`` set to each value of ``grid``.

    Per-point failures are stored in the row's ``error`` column and do not
    stop the sweep.
    """
    if variable not in SWEEP_FIELDS:
        raise DomainError(f"unknown sweep variable {variable!r}; expected one of {sorted(SWEEP_FIELDS)}")
    if objective not in OBJECTIVE_COLUMNS:
        raise DomainError(f"unknown objective {objective!r}; expected one of {sorted(OBJECTIVE_COLUMNS)}")
    if len(grid) == 0:
        raise DomainError("sweep grid is empty")
    if objective == "max-rate" and target is None:
        raise DomainError("objective max-rate needs a target")
    if variable == "Nt":
        grid = [int(v) for v in grid]
    jobs = [(p, variable, v, objective, target, s) for v in grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    cols = (variable,) + OBJECTIVE_COLUMNS[objective] + ("error",)
    return SweepTable(variable, objective, cols, rows)

