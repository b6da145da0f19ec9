"""Named experiment presets reproducing the packet-loss figures.

Each preset returns a :class:`Table` whose rows are plain dicts keyed by
``columns``. ``meta`` holds the fixed scenario parameters and is written to
the provenance header by the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic as an
from . import montecarlo as mc
from . import optimize as op
from .analytic import SystemParams


def dbm_to_linear(dbm: float) -> float:
    """Power in dBm to linear units relative to the unit noise variance."""
    return 10.0 ** (dbm / 10.0)


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


def _params_meta(p: SystemParams, **extra) -> dict:
    meta = {"nt": p.nt, "phi": p.phi, "T": p.T, "R": p.R, "pmax": p.pmax, "sigma2": p.sigma2}
    meta.update(extra)
    return meta


FIG2_Q = tuple(float(q) for q in np.geomspace(1.0, 100.0, 20))


def fig2(n_trials: int = 1_000_000, seed: int = 0, workers: int = 1,
         q_grid=FIG2_Q) -> Table:
    """Packet loss vs Q: truncated (closed form and Monte Carlo), conventional, phi = 1."""
    base = SystemParams(nt=4, phi=0.9, T=100, R=0.8, pmax=dbm_to_linear(23.0))
    cols = ("Q", "p_loss_analytic_truncated", "p_loss_mc", "stderr",
            "p_loss_conventional", "p_loss_perfect")
    t = Table(cols, meta=_params_meta(base, pmax_dbm=23.0, n_trials=n_trials, seed=seed))
    for q in q_grid:
        p = base.replace(q=q)
        est = mc.simulate_packet_loss(p, n_trials, seed, workers=workers)
        t.rows.append({
            "Q": q,
            "p_loss_analytic_truncated": an.packet_loss_truncated(p).p_loss,
            "p_loss_mc": est.p_loss_hat,
            "stderr": est.stderr,
            "p_loss_conventional": an.packet_loss_conventional(p, cross_check=False),
            "p_loss_perfect": an.packet_loss_perfect(p.replace(phi=1.0)).p_loss,
        })
    return t


FIG3_NT = (2, 4, 8)
FIG3_Q = tuple(float(q) for q in np.geomspace(0.1, 100.0, 61))


def fig3(nts=FIG3_NT, q_grid=FIG3_Q, s: op.SearchSpec = op.SearchSpec()) -> Table:
    """Packet loss vs Q for several antenna counts, with the per-Nt optimum."""
    base = SystemParams(nt=2, phi=0.9, T=150, R=0.3, pmax=dbm_to_linear(10.0))
    cols = ("Q",) + tuple(f"p_loss_Nt{n}" for n in nts)
    t = Table(cols, meta=_params_meta(base, nt=",".join(map(str, nts)), pmax_dbm=10.0))
    for q in q_grid:
        row = {"Q": q}
        for n in nts:
            row[f"p_loss_Nt{n}"] = an.packet_loss(base.replace(nt=n, q=q)).p_loss
        t.rows.append(row)
    for n in nts:
        r = op.minimize_packet_loss_q(base.replace(nt=n), None, s)
        t.meta[f"q_star_Nt{n}"] = r.q_star
        t.meta[f"p_loss_star_Nt{n}"] = r.p_loss_star
    return t


FIG4_NT = (4, 8, 16)
FIG4_PHI = tuple(round(float(v), 10) for v in np.linspace(0.5, 1.0, 11))


def fig4(nts=FIG4_NT, phi_grid=FIG4_PHI, s: op.SearchSpec = op.SearchSpec(),
         workers: int = 1) -> Table:
    """Q-optimized packet loss vs reciprocity coefficient for several antenna counts."""
    base = SystemParams(nt=4, phi=0.9, T=150, R=0.5, pmax=dbm_to_linear(23.0))
    return _min_loss_table(base, "phi", phi_grid, "Nt", "nt", nts, s, workers,
                           meta=_params_meta(base, phi="swept", nt=",".join(map(str, nts)),
                                             pmax_dbm=23.0))


FIG5_Q = tuple(float(q) for q in np.geomspace(0.05, 29.9, 120))


def fig5(q_grid=FIG5_Q, s: op.SearchSpec = op.SearchSpec()) -> Table:
    """Perfect-reciprocity packet loss vs Q with its convexity region and optimum."""
    base = SystemParams(nt=4, phi=1.0, T=150, R=0.5, pmax=10.0)
    t = Table(("Q", "p_loss_perfect", "p_t", "eps_cond"),
              meta=_params_meta(base, pmax_dbm=10.0, q0=an.q0_convexity(base.sigma2),
                                q_hard_bound=an.q_hard_bound(base)))
    for q in q_grid:
        lb = an.packet_loss_perfect(base.replace(q=q))
        t.rows.append({"Q": q, "p_loss_perfect": lb.p_loss, "p_t": lb.p_t, "eps_cond": lb.eps_cond})
    r = op.minimize_packet_loss_q(base, None, s)
    t.meta["q_star"] = r.q_star
    t.meta["p_loss_star"] = r.p_loss_star
    return t


FIG6_TARGETS = (1e-5, 1e-7, 1e-9)
FIG6_Q = tuple(float(q) for q in np.geomspace(0.1, 100.0, 61))


def fig6(targets=FIG6_TARGETS, q_grid=FIG6_Q) -> Table:
    """Maximum rate vs Q for several reliability targets (phi = 1)."""
    base = SystemParams(nt=4, phi=1.0, T=150, R=0.5, pmax=dbm_to_linear(23.0))
    cols = ("Q",) + tuple(f"maxR@{tg:g}" for tg in targets)
    t = Table(cols, meta=_params_meta(base, R="solved", pmax_dbm=23.0))
    for q in q_grid:
        row = {"Q": q}
        for tg in targets:
            row[f"maxR@{tg:g}"] = op.max_rate(base.replace(q=q), tg)
        t.rows.append(row)
    return t


FIG7_R = (0.4, 0.8, 1.2)
FIG7_PMAX_DBM = tuple(float(v) for v in np.linspace(0.0, 30.0, 31))


def fig7(rates=FIG7_R, pmax_dbm_grid=FIG7_PMAX_DBM, s: op.SearchSpec = op.SearchSpec()) -> Table:
    """Q-optimized perfect-reciprocity packet loss vs Pmax for several rates."""
    base = SystemParams(nt=5, phi=1.0, T=150, R=0.4, pmax=1.0)
    cols = ("Pmax_dbm", "Pmax") + tuple(f"min_p_loss_R{r:g}" for r in rates)
    t = Table(cols, meta=_params_meta(base, R=",".join(f"{r:g}" for r in rates), pmax="swept"))
    for dbm in pmax_dbm_grid:
        pm = dbm_to_linear(dbm)
        row = {"Pmax_dbm": dbm, "Pmax": pm}
        for r in rates:
            row[f"min_p_loss_R{r:g}"] = op.min_loss_over_q(base.replace(R=r, pmax=pm), s)
        t.rows.append(row)
    return t


FIG8_NT = (2, 4, 8)
FIG8_T = tuple(range(100, 1001, 100))


def fig8(nts=FIG8_NT, t_grid=FIG8_T, s: op.SearchSpec = op.SearchSpec(),
         workers: int = 1) -> Table:
    """Q-optimized packet loss vs blocklength for several antenna counts."""
    base = SystemParams(nt=4, phi=0.9, T=100, R=0.8, pmax=dbm_to_linear(23.0))
    return _min_loss_table(base, "T", t_grid, "Nt", "nt", nts, s, workers,
                           meta=_params_meta(base, T="swept", nt=",".join(map(str, nts)),
                                             pmax_dbm=23.0))


def _min_loss_table(base, variable, grid, tag, field_name, values, s, workers, meta) -> Table:
    cols = (variable,) + tuple(c for v in values for c in (f"min_p_loss_{tag}{v}", f"q_star_{tag}{v}"))
    t = Table(cols, meta=meta)
    t.rows = [{variable: g} for g in grid]
    for v in values:
        st = op.sweep(base.replace(**{field_name: v}), variable, list(grid), "min-loss-over-Q",
                      s=s, workers=workers)
        for row, r in zip(t.rows, st.rows):
            if r["error"]:
                t.notes.append(f"{tag}={v}, {variable}={row[variable]}: {r['error']}")
            row[f"min_p_loss_{tag}{v}"] = r.get("p_loss_star", math.nan)
            row[f"q_star_{tag}{v}"] = r.get("q_star", math.nan)
    return t


FIGURES = {2: fig2, 3: fig3, 4: fig4, 5: fig5, 6: fig6, 7: fig7, 8: fig8}
