"""Command-line front end.

Usage::

    cipc <eval|montecarlo|sweep|optimize|max-rate|min-pmax|reproduce-figure> [options]

Scenario parameters come from ``--config FILE`` (``key = value`` lines,
``#`` comments) and are overridden by flags. Output is CSV (``#`` provenance
lines, a header row, data rows) or JSON. The provenance header records a
canonical argument list that regenerates the file without the config file.

Exit codes: 0 success, 2 usage error, 3 non-convergence, 4 infeasible target.
"""

from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import analytic as an
from . import figures
from . import montecarlo as mc
from . import optimize as op
from .analytic import SystemParams
from .errors import ConvergenceError, DomainError
from .figures import Table, dbm_to_linear

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_INFEASIBLE = 4

COMMANDS = ("eval", "montecarlo", "sweep", "optimize", "max-rate", "min-pmax", "reproduce-figure")


class UsageError(Exception):
    pass


class InfeasibleTarget(Exception):
    pass


# ============================================================================
#  Scenario
# ============================================================================

@dataclass
class Scenario:
    """Scenario as given by the user, before conversion to :class:`SystemParams`."""

    nt: int | None = None
    phi: float | None = None
    T: float | None = None
    R: float | None = None
    pmax: float | None = None
    pmax_dbm: float | None = None
    sigma2: float = 1.0
    q: float | None = None
    seed: int = 0
    n_trials: int = 1_000_000
    target: float | None = None
    output_format: str = "csv"
    output_path: str | None = None

    def resolved_pmax(self) -> float:
        if self.pmax is not None and self.pmax_dbm is not None:
            raise UsageError("give exactly one of pmax and pmax_dbm")
        if self.pmax_dbm is not None:
            return dbm_to_linear(self.pmax_dbm)
        if self.pmax is None:
            raise UsageError("missing required field 'pmax' (or 'pmax_dbm')")
        return self.pmax

    def to_params(self, need_q: bool = True) -> SystemParams:
        for name in ("nt", "phi", "T", "R"):
            if getattr(self, name) is None:
                raise UsageError(f"missing required field {name!r}")
        if need_q and self.q is None:
            raise UsageError("missing required field 'q'")
        try:
            return SystemParams(nt=self.nt, phi=self.phi, T=self.T, R=self.R,
                                pmax=self.resolved_pmax(), sigma2=self.sigma2,
                                q=1.0 if self.q is None else self.q)
        except DomainError as exc:
            raise UsageError(f"invalid scenario: {exc}") from exc


# config keys and flag spellings mapped to Scenario fields
_KEY_ALIASES = {
    "nt": "nt", "phi": "phi", "t": "T", "T": "T", "r": "R", "R": "R", "rate": "R",
    "pmax": "pmax", "pmax_dbm": "pmax_dbm", "sigma2": "sigma2", "q": "q", "Q": "q",
    "seed": "seed", "n_trials": "n_trials", "trials": "n_trials", "target": "target",
    "format": "output_format", "output_format": "output_format",
    "out": "output_path", "output_path": "output_path",
}
_INT_FIELDS = {"nt", "seed", "n_trials"}
_STR_FIELDS = {"output_format", "output_path"}


def _convert(name: str, raw: str):
    if name in _STR_FIELDS:
        return raw
    try:
        if name in _INT_FIELDS:
            return int(raw)
        if name == "pmax" and raw.strip().lower() in ("inf", "infinity"):
            return math.inf
        return float(raw)
    except ValueError:
        raise UsageError(f"field {name!r}: cannot parse {raw!r}") from None


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into Scenario field values."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        if key not in _KEY_ALIASES:
            raise UsageError(f"config line {lineno}: unknown field {key!r}")
        name = _KEY_ALIASES[key]
        out[name] = _convert(name, value)
    return out


def build_scenario(args: argparse.Namespace) -> Scenario:
    values = {}
    if args.config:
        try:
            values.update(parse_config(Path(args.config).read_text(encoding="utf-8")))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    flags = {}
    for f in fields(Scenario):
        v = getattr(args, f.name, None)
        if v is not None:
            flags[f.name] = v
    if "pmax" in flags or "pmax_dbm" in flags:
        values.pop("pmax", None)
        values.pop("pmax_dbm", None)
    values.update(flags)
    sc = Scenario(**values)
    if sc.output_format not in ("csv", "json"):
        raise UsageError(f"field 'output_format': expected csv or json, got {sc.output_format!r}")
    if sc.n_trials < 1:
        raise UsageError(f"field 'n_trials': must be >= 1, got {sc.n_trials}")
    return sc


def parse_grid(text: str) -> list[float]:
    """Grid from ``a,b,c``, ``lin:START:STOP:N`` or ``log:START:STOP:N``."""
    text = (text or "").strip()
    if not text:
        raise UsageError("empty grid")
    try:
        if text.startswith(("lin:", "log:")):
            kind, a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise UsageError("empty grid")
            fn = np.linspace if kind == "lin" else np.geomspace
            return [float(v) for v in fn(float(a), float(b), n)]
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None
    if not vals:
        raise UsageError("empty grid")
    return vals


# ============================================================================
#  Output
# ============================================================================

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".16e")
    return "" if v is None else str(v)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return _fmt(v)
        return v
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(table: Table, provenance: dict, output_format: str) -> str:
    if output_format == "json":
        doc = {
            "provenance": {k: _json_value(v) for k, v in provenance.items()},
            "meta": {k: _json_value(v) for k, v in table.meta.items()},
            "notes": table.notes,
            "columns": list(table.columns),
            "rows": [{c: _json_value(r.get(c)) for c in table.columns} for r in table.rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    lines = [f"# {k} = {_fmt(v)}" for k, v in provenance.items()]
    lines += [f"# meta.{k} = {_fmt(v)}" for k, v in table.meta.items()]
    lines += [f"# note = {n}" for n in table.notes]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(r.get(c)) for c in table.columns) for r in table.rows]
    return "\n".join(lines) + "\n"


def write_output(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def read_provenance(path: str) -> dict:
    """Provenance fields of a CSV or JSON output file."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return json.loads(text)["provenance"]
    out = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition("=")
        key = key.strip()
        if not key.startswith(("meta.", "note")):
            out[key] = value.strip()
    return out


def rerun_argv(path: str) -> list[str]:
    """Argument list recorded in an output file's provenance."""
    return shlex.split(read_provenance(path)["argv"])


# ============================================================================
#  Commands
# ============================================================================

def _canonical_argv(command: str, sc: Scenario, extra: list[str], need_q: bool = True) -> list[str]:
    argv = [command]
    for flag, v in (("--nt", sc.nt), ("--phi", sc.phi), ("--t", sc.T), ("--rate", sc.R)):
        if v is not None:
            argv += [flag, repr(v)]
    if sc.pmax_dbm is not None:
        argv += ["--pmax-dbm", repr(sc.pmax_dbm)]
    elif sc.pmax is not None:
        argv += ["--pmax", "inf" if math.isinf(sc.pmax) else repr(sc.pmax)]
    argv += ["--sigma2", repr(sc.sigma2)]
    if need_q and sc.q is not None:
        argv += ["--q", repr(sc.q)]
    return argv + extra + ["--format", sc.output_format]


def _provenance(command: str, argv: list[str], p: SystemParams | None, **extra) -> dict:
    prov = {"cipc_version": __version__, "command": command, "argv": shlex.join(argv)}
    if p is not None:
        prov.update({"nt": p.nt, "phi": p.phi, "T": p.T, "R": p.R, "pmax": p.pmax,
                     "sigma2": p.sigma2, "q": p.q, "scheme": an.select_scheme(p)})
    prov.update(extra)
    return prov


def _breakdown_row(p: SystemParams) -> dict:
    lb = an.packet_loss(p)
    return {"scheme": an.select_scheme(p), "p_t": lb.p_t, "eps_cond": lb.eps_cond, "p_loss": lb.p_loss}


def cmd_eval(sc: Scenario, args) -> tuple[Table, dict]:
    p = sc.to_params()
    t = Table(("scheme", "p_t", "eps_cond", "p_loss"), [_breakdown_row(p)])
    return t, _provenance("eval", _canonical_argv("eval", sc, []), p)


def cmd_montecarlo(sc: Scenario, args) -> tuple[Table, dict]:
    p = sc.to_params()
    try:
        est = mc.simulate_packet_loss(p, sc.n_trials, sc.seed, workers=args.workers, kernel=args.kernel)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    analytic = an.packet_loss(p).p_loss
    diff = abs(analytic - est.p_loss_hat)
    if est.stderr > 0:
        agreement = diff / est.stderr
    else:
        agreement = 0.0 if diff == 0 else math.inf
    cols = ("p_loss_mc", "p_t_mc", "eps_cond_mc", "stderr", "n_trials", "n_transmit", "seed",
            "p_loss_analytic", "agreement")
    row = {"p_loss_mc": est.p_loss_hat, "p_t_mc": est.p_t_hat, "eps_cond_mc": est.eps_cond_hat,
           "stderr": est.stderr, "n_trials": est.n_trials, "n_transmit": est.n_transmit,
           "seed": est.seed, "p_loss_analytic": analytic, "agreement": agreement}
    extra = ["--seed", str(sc.seed), "--trials", str(sc.n_trials), "--kernel", args.kernel]
    prov = _provenance("montecarlo", _canonical_argv("montecarlo", sc, extra), p,
                       seed=sc.seed, n_trials=sc.n_trials, kernel=args.kernel)
    return Table(cols, [row]), prov


def _search_spec(args) -> op.SearchSpec:
    try:
        return op.SearchSpec(grid_points=args.grid_points, refine_tol=args.refine_tol)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def cmd_sweep(sc: Scenario, args) -> tuple[Table, dict]:
    if args.variable is None:
        raise UsageError("sweep needs --variable")
    grid = parse_grid(args.grid)
    need_q = args.variable != "Q" and args.objective != "min-loss-over-Q"
    p = sc.to_params(need_q=need_q)
    try:
        st = op.sweep(p, args.variable, grid, args.objective, target=sc.target,
                      s=_search_spec(args), workers=args.workers)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    cols = tuple(st.columns)
    extra = ["--variable", args.variable, "--grid", ",".join(repr(g) for g in grid),
             "--objective", args.objective, "--grid-points", str(args.grid_points),
             "--refine-tol", repr(args.refine_tol)]
    if sc.target is not None:
        extra += ["--target", repr(sc.target)]
    prov = _provenance("sweep", _canonical_argv("sweep", sc, extra, need_q), p,
                       variable=args.variable, objective=args.objective)
    return Table(cols, st.rows), prov


def cmd_optimize(sc: Scenario, args) -> tuple[Table, dict]:
    p = sc.to_params(need_q=False)
    try:
        r = op.minimize_packet_loss_q(p, sc.target, _search_spec(args), convex_method=args.convex_method)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    cols = ("q_star", "p_loss_star", "interval_lo", "interval_hi", "method", "p_t", "eps_cond")
    row = {"q_star": r.q_star, "p_loss_star": r.p_loss_star, "interval_lo": r.interval[0],
           "interval_hi": r.interval[1], "method": r.method,
           "p_t": r.breakdown.p_t, "eps_cond": r.breakdown.eps_cond}
    extra = ["--grid-points", str(args.grid_points), "--refine-tol", repr(args.refine_tol),
             "--convex-method", args.convex_method]
    if sc.target is not None:
        extra += ["--target", repr(sc.target)]
    prov = _provenance("optimize", _canonical_argv("optimize", sc, extra, False), p.replace(q=r.q_star))
    return Table(cols, [row]), prov


def cmd_max_rate(sc: Scenario, args) -> tuple[Table, dict]:
    if sc.target is None:
        raise UsageError("max-rate needs --target")
    p = sc.to_params()
    try:
        rate = op.max_rate(p, sc.target, r_hi=args.r_hi)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    extra = ["--target", repr(sc.target)] + (["--r-hi", repr(args.r_hi)] if args.r_hi else [])
    prov = _provenance("max-rate", _canonical_argv("max-rate", sc, extra), p, target=sc.target)
    return Table(("q", "target", "max_rate"), [{"q": p.q, "target": sc.target, "max_rate": rate}]), prov


def cmd_min_pmax(sc: Scenario, args) -> tuple[Table, dict]:
    if sc.target is None:
        raise UsageError("min-pmax needs --target")
    if args.pmax_hi is None:
        raise UsageError("min-pmax needs --pmax-hi")
    sc_params = Scenario(**{**sc.__dict__, "pmax": args.pmax_hi, "pmax_dbm": None})
    p = sc_params.to_params(need_q=False)
    try:
        res = op.min_pmax(p, sc.target, args.pmax_hi, args.pmax_lo, _search_spec(args))
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    if isinstance(res, op.Infeasible):
        raise InfeasibleTarget(res.reason)
    extra = ["--target", repr(sc.target), "--pmax-hi", repr(args.pmax_hi),
             "--grid-points", str(args.grid_points), "--refine-tol", repr(args.refine_tol)]
    if args.pmax_lo is not None:
        extra += ["--pmax-lo", repr(args.pmax_lo)]
    argv = _canonical_argv("min-pmax", Scenario(**{**sc.__dict__, "pmax": None, "pmax_dbm": None}),
                           extra, False)
    prov = _provenance("min-pmax", argv, None, nt=p.nt, phi=p.phi, T=p.T, R=p.R,
                       sigma2=p.sigma2, target=sc.target)
    row = {"target": sc.target, "pmax_star": res, "pmax_star_dbm": 10.0 * math.log10(res)}
    return Table(("target", "pmax_star", "pmax_star_dbm"), [row]), prov


def cmd_reproduce_figure(sc: Scenario, args) -> tuple[Table, dict]:
    n = args.figure
    if n not in figures.FIGURES:
        raise UsageError(f"unknown figure {n}; choose from {sorted(figures.FIGURES)}")
    extra = []
    if n == 2:
        table = figures.fig2(n_trials=sc.n_trials, seed=sc.seed, workers=args.workers)
        extra = ["--seed", str(sc.seed), "--trials", str(sc.n_trials)]
    elif n in (4, 8):
        table = figures.FIGURES[n](workers=args.workers)
    else:
        table = figures.FIGURES[n]()
    argv = ["reproduce-figure", str(n)] + extra + ["--format", sc.output_format]
    return table, _provenance("reproduce-figure", argv, None, figure=n)


HANDLERS = {
    "eval": cmd_eval, "montecarlo": cmd_montecarlo, "sweep": cmd_sweep, "optimize": cmd_optimize,
    "max-rate": cmd_max_rate, "min-pmax": cmd_min_pmax, "reproduce-figure": cmd_reproduce_figure,
}


# ============================================================================
#  Argument parsing
# ============================================================================

def _pmax_value(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _add_scenario_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("scenario")
    g.add_argument("--config", metavar="FILE")
    g.add_argument("--q", type=float, dest="q")
    g.add_argument("--phi", type=float)
    g.add_argument("--nt", type=int)
    g.add_argument("--t", type=float, dest="T")
    g.add_argument("--rate", type=float, dest="R")
    pm = g.add_mutually_exclusive_group()
    pm.add_argument("--pmax-dbm", type=float, dest="pmax_dbm")
    pm.add_argument("--pmax", type=_pmax_value, help="linear power, or 'inf'")
    g.add_argument("--sigma2", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--trials", type=int, dest="n_trials")
    g.add_argument("--target", type=float)
    g.add_argument("--out", dest="output_path")
    g.add_argument("--format", choices=("csv", "json"), dest="output_format")
    g.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cipc", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"cipc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    d = op.SearchSpec()
    for name in COMMANDS:
        sp = sub.add_parser(name)
        _add_scenario_flags(sp)
        if name in ("sweep", "optimize", "min-pmax"):
            sp.add_argument("--grid-points", type=int, default=d.grid_points)
            sp.add_argument("--refine-tol", type=float, default=d.refine_tol)
        if name == "montecarlo":
            sp.add_argument("--kernel", choices=("exact", "linear"), default="exact")
        if name == "sweep":
            sp.add_argument("--variable", choices=tuple(op.SWEEP_FIELDS))
            sp.add_argument("--grid", default="", help="a,b,c | lin:A:B:N | log:A:B:N")
            sp.add_argument("--objective", choices=tuple(op.OBJECTIVE_COLUMNS), default="loss")
        if name == "optimize":
            sp.add_argument("--convex-method", choices=("golden", "derivative-root"), default="golden")
        if name == "max-rate":
            sp.add_argument("--r-hi", type=float)
        if name == "min-pmax":
            sp.add_argument("--pmax-hi", type=float)
            sp.add_argument("--pmax-lo", type=float)
        if name == "reproduce-figure":
            sp.add_argument("figure", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        sc = build_scenario(args)
        table, prov = HANDLERS[args.command](sc, args)
        write_output(render(table, prov, sc.output_format), sc.output_path)
    except (UsageError, DomainError) as exc:
        print(f"cipc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"cipc: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except InfeasibleTarget as exc:
        print(f"cipc: infeasible target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
