"""Command-line driver: ``pot1d solve|oracle|compare|catalog``.

Configuration comes from an optional TOML file with the sections below;
command-line flags override file values.

    [problem]
    example = "ex_simple"          # or a [problem.f] / [problem.g] table
    # [problem.f]
    # lo = -1.0
    # hi = 1.0
    # breakpoints = [0.0]
    # coeffs = [[0.25, 0.0, 0.0, 0.0], [0.75, 0.0, 0.0, 0.0]]   # c0..c3 per piece

    [solver]
    sigma = 0.01
    grid = 128                     # 0 sizes the grid from the derivative bounds
    r_safety = 0.5
    max_steps = 5000000
    max_dt = inf
    quad_tol = 1e-10
    check_cadence = 200
    probe_count = 0                # 0 picks J // 16

    [bounds]                       # any of these replaces the computed value
    # delta1 = 0.2
    # delta2 = 4.0
    # psi = 10.0
    # gamma = 100.0
    # k_tt = 1.0

    [output]
    dir = "out"
    timeseries = false
    solution = true

Exit codes: 0 success (converged, or certified for ``compare``), 2 not
converged / not certified, 1 on any error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import derive_bounds, select_dx
from .densities import (
    CATALOG_IDS,
    DEFAULT_QUAD_TOL,
    catalog,
    custom_entry,
    piecewise_cubic,
    validate,
)
from .errors import ConfigError, Pot1dError
from .grid_ops import build_grid, grad_all, lap_all
from .monitor import StoppingRule, error_values
from .oracle import OptimalMap
from .stepper import DEFAULT_CADENCE, StepConfig, run

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("pot1d")

SCHEMA_VERSION = 1
DEFAULT_GRID = 128
AUTO_GRID_RANGE = (64, 16384)

SOLUTION_HEADER = "j,x,U,gradU,lapU"
TIMESERIES_HEADER = "step,t,dt,maxE,minLap"
ORACLE_HEADER = "j,x,T"
COMPARE_HEADER = "j,x,gradU,lapU,T_oracle,abs_err,E"

_BOUND_KEYS = {"delta1", "delta2", "psi", "gamma", "k_tt"}
_SECTIONS = {"problem", "solver", "bounds", "output"}


@dataclass
class RunConfig:
    example_id: str | None = None
    custom: dict | None = None
    j_count: int = DEFAULT_GRID
    sigma: float = 0.01
    r_safety: float = 0.5
    max_steps: int = 5_000_000
    max_dt: float = math.inf
    quad_tol: float = DEFAULT_QUAD_TOL
    check_cadence: int = DEFAULT_CADENCE
    probe_count: int = 0
    override_bounds: dict = field(default_factory=dict)
    output_dir: str = "."
    emit_timeseries: bool = False
    emit_solution: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.j_count != 0 and self.j_count < 4:
            raise ConfigError("grid must be 0 (auto) or at least 4")
        if not 0 < self.r_safety <= 0.5:
            raise ConfigError("r_safety must lie in (0, 0.5]")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be nonnegative")
        if not self.quad_tol > 0:
            raise ConfigError("quad_tol must be positive")
        if self.check_cadence < 1:
            raise ConfigError("check_cadence must be >= 1")
        unknown = set(self.override_bounds) - _BOUND_KEYS
        if unknown:
            raise ConfigError(f"unknown [bounds] keys: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# configuration


def _density_from_table(tab, name):
    try:
        lo, hi = float(tab["lo"]), float(tab["hi"])
        coeffs = [tuple(float(c) for c in piece) for piece in tab["coeffs"]]
        breaks = tuple(float(b) for b in tab.get("breakpoints", ()))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"[problem.{name}] needs lo, hi, coeffs (and optional breakpoints): {exc}")
    if any(len(c) > 4 or not c for c in coeffs):
        raise ConfigError(f"[problem.{name}] each piece takes 1 to 4 coefficients c0..c3")
    if len(coeffs) != len(breaks) + 1:
        raise ConfigError(f"[problem.{name}] needs one more piece than breakpoints")
    try:
        d = piecewise_cubic(lo, hi, breaks, coeffs, label=f"custom {name}")
    except ValueError as exc:
        raise ConfigError(f"[problem.{name}]: {exc}")
    rep = validate(d)
    if not rep.ok:
        raise ConfigError(f"[problem.{name}] is not a probability density on [{lo}, {hi}]: "
                          f"min={rep.min_val:g}, mass={rep.mass:.12g}")
    return d


def load_config_file(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config {path}: {exc}")
    unknown = set(data) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return data


def build_run_config(args, env=None):
    """Merge the optional config file with flags (flags win)."""
    env = os.environ if env is None else env
    data = load_config_file(args.config) if getattr(args, "config", None) else {}
    prob, solver = data.get("problem", {}), data.get("solver", {})
    out, bnds = data.get("output", {}), data.get("bounds", {})
    kw = {}
    if "example" in prob:
        kw["example_id"] = str(prob["example"])
    if "f" in prob or "g" in prob:
        if not ("f" in prob and "g" in prob):
            raise ConfigError("custom problems need both [problem.f] and [problem.g]")
        kw["custom"] = {"f": prob["f"], "g": prob["g"]}
    keymap = {"sigma": ("sigma", float), "grid": ("j_count", int), "r_safety": ("r_safety", float),
              "max_steps": ("max_steps", int), "max_dt": ("max_dt", float),
              "quad_tol": ("quad_tol", float), "check_cadence": ("check_cadence", int),
              "probe_count": ("probe_count", int)}
    for key, val in solver.items():
        if key not in keymap:
            raise ConfigError(f"unknown [solver] key {key!r}")
        name, typ = keymap[key]
        kw[name] = typ(val)
    if bnds:
        kw["override_bounds"] = {k: float(v) for k, v in bnds.items()}
    if "dir" in out:
        kw["output_dir"] = str(out["dir"])
    if "timeseries" in out:
        kw["emit_timeseries"] = bool(out["timeseries"])
    if "solution" in out:
        kw["emit_solution"] = bool(out["solution"])

    if getattr(args, "example", None):
        kw["example_id"] = args.example
        kw["custom"] = None
    for flag, name in (("sigma", "sigma"), ("grid", "j_count"), ("max_steps", "max_steps")):
        val = getattr(args, flag, None)
        if val is not None:
            kw[name] = val
    if getattr(args, "out", None):
        kw["output_dir"] = args.out
    elif "output_dir" not in kw and env.get("POT1D_OUT"):
        kw["output_dir"] = env["POT1D_OUT"]
    if getattr(args, "timeseries", False):
        kw["emit_timeseries"] = True
    if not kw.get("example_id") and not kw.get("custom"):
        raise ConfigError("no problem given: use --example or a [problem] section")
    return RunConfig(**kw)


def resolve_entry(cfg):
    if cfg.custom:
        return custom_entry(_density_from_table(cfg.custom["f"], "f"),
                            _density_from_table(cfg.custom["g"], "g"))
    return catalog(cfg.example_id)


def auto_grid(entry, db):
    """``J = ceil((B - A) / dx_max)`` clamped to the supported range."""
    dx = select_dx(db)
    lo, hi = AUTO_GRID_RANGE
    if not math.isfinite(dx):
        return lo
    return int(min(max(math.ceil((entry.f.interval_hi - entry.f.interval_lo) / dx), lo), hi))


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    return "%.17g" % v


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    lines = [f"# pot1d schema {SCHEMA_VERSION}", header]
    for r in rows:
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else _fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def read_csv(path):
    """Parse a CSV written by this module into ``(header, float array)``."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    header = lines[0]
    body = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, body.reshape(len(lines) - 1, header.count(",") + 1)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_payload(entry, cfg, db, report):
    out = report.to_dict()
    out.update(
        schema_version=SCHEMA_VERSION,
        version=__version__,
        example=entry.id,
        bounds={**{k: getattr(db, k) for k in db.provenance}, "provenance": db.provenance,
                "heuristic": db.heuristic, "chain": db.details.get("chain", {})},
        config={"sigma": cfg.sigma, "j_count": report.extra["j_count"],
                "r_safety": cfg.r_safety, "max_steps": cfg.max_steps, "max_dt": cfg.max_dt,
                "quad_tol": cfg.quad_tol, "check_cadence": cfg.check_cadence,
                "probe_count": cfg.probe_count, "override_bounds": cfg.override_bounds},
    )
    return _jsonable(out)


# ---------------------------------------------------------------------------
# pipeline


def solve_pipeline(cfg):
    """Run densities -> bounds -> stepper -> monitor; returns everything produced."""
    entry = resolve_entry(cfg)
    db = derive_bounds(entry, overrides=cfg.override_bounds)
    j_count = cfg.j_count or auto_grid(entry, db)
    grid = build_grid(entry.f.interval_lo, entry.f.interval_hi, j_count)
    step_cfg = StepConfig.for_entry(entry, r_safety=cfg.r_safety, max_dt=cfg.max_dt,
                                    max_steps=cfg.max_steps)
    stop = StoppingRule(cfg.sigma, check_subset=cfg.probe_count)
    state, report = run(entry, db, step_cfg, grid, stop, quad_tol=cfg.quad_tol,
                        cadence=cfg.check_cadence)
    return entry, db, grid, state, report


def _write_solution_files(cfg, grid, state, report):
    row = state.row
    if cfg.emit_solution:
        grad, lap = grad_all(row, grid), lap_all(row, grid)
        rows = ((j, x, row[j + 1], grad[j], lap[j]) for j, x in enumerate(grid.interior))
        write_atomic(os.path.join(cfg.output_dir, "solution.csv"), csv_text(SOLUTION_HEADER, rows))
    if cfg.emit_timeseries:
        write_atomic(os.path.join(cfg.output_dir, "timeseries.csv"),
                     csv_text(TIMESERIES_HEADER, report.timeseries))


def cmd_solve(cfg, out=None):
    out = out or sys.stdout
    entry, db, grid, state, report = solve_pipeline(cfg)
    _write_solution_files(cfg, grid, state, report)
    write_atomic(os.path.join(cfg.output_dir, "report.json"),
                 json.dumps(report_payload(entry, cfg, db, report), indent=2, sort_keys=True) + "\n")
    status = "converged" if report.converged else "NOT converged"
    print(f"{entry.id}: {status} after {report.iterations} steps, t={report.t_total:.6g}, "
          f"max E={report.max_E_final:.3e}, map error <= {report.map_error_bound:.4g} "
          f"(J={grid.j_count}, {report.wall_seconds:.2f}s)", file=out)
    return 0 if report.converged else 2


def cmd_oracle(cfg, out=None):
    out = out or sys.stdout
    entry = resolve_entry(cfg)
    j_count = cfg.j_count or AUTO_GRID_RANGE[0]
    grid = build_grid(entry.f.interval_lo, entry.f.interval_hi, j_count)
    xs = grid.interior
    ts = OptimalMap(entry, quad_tol=cfg.quad_tol)(xs)
    write_atomic(os.path.join(cfg.output_dir, "oracle.csv"),
                 csv_text(ORACLE_HEADER, zip(range(xs.size), xs, ts)))
    print(f"{entry.id}: wrote {xs.size} oracle values", file=out)
    return 0


def compare_rows(entry, grid, row, quad_tol):
    om = OptimalMap(entry, quad_tol=quad_tol)
    xs = grid.interior
    grad, lap = grad_all(row, grid), lap_all(row, grid)
    t = om(xs)
    e, _ = error_values(entry, row, grid, None, quad_tol)
    return [(j, xs[j], grad[j], lap[j], t[j], abs(grad[j] - t[j]), e[j]) for j in range(xs.size)]


def cmd_compare(cfg, out=None):
    out = out or sys.stdout
    entry, db, grid, state, report = solve_pipeline(cfg)
    _write_solution_files(cfg, grid, state, report)
    rows = compare_rows(entry, grid, state.row, cfg.quad_tol)
    write_atomic(os.path.join(cfg.output_dir, "compare.csv"), csv_text(COMPARE_HEADER, rows))
    max_err = max(r[5] for r in rows)
    report.oracle_max_err = max_err
    certified = bool(report.converged and max_err <= report.map_error_bound)
    payload = report_payload(entry, cfg, db, report)
    payload["certified"] = certified
    write_atomic(os.path.join(cfg.output_dir, "report.json"),
                 json.dumps(payload, indent=2, sort_keys=True) + "\n")
    verdict = "certified" if certified else "NOT certified"
    print(f"{entry.id}: max |gradU - T| = {max_err:.6e}, bound {report.map_error_bound:.6g}: "
          f"{verdict}", file=out)
    return 0 if certified else 2


def catalog_listing():
    items = []
    for eid in CATALOG_IDS:
        e = catalog(eid)
        items.append({
            "id": eid,
            "source_domain": [e.f.interval_lo, e.f.interval_hi],
            "target_domain": [e.g.interval_lo, e.g.interval_hi],
            "source": e.f.label,
            "target": e.g.label,
            "smooth": e.is_smooth,
            "notes": e.notes,
        })
    return items


def cmd_catalog(as_json=False, out=None):
    out = out or sys.stdout
    items = catalog_listing()
    if as_json:
        print(json.dumps(items, indent=2), file=out)
        return 0
    for it in items:
        (a, b), (c, d) = it["source_domain"], it["target_domain"]
        print(f"{it['id']:<22} f on [{a:g}, {b:g}]: {it['source']}", file=out)
        print(f"{'':<22} g on [{c:g}, {d:g}]: {it['target']}", file=out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 rather than argparse's 2 (2 means non-convergence)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="pot1d", description="1-D optimal transport by parabolic time marching.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="{solve,oracle,compare,catalog}",
                           parser_class=_Parser)

    def common(sp):
        sp.add_argument("--example", help="built-in example id (see `pot1d catalog`)")
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--sigma", type=float, help="tolerance on the CDF mismatch E")
        sp.add_argument("--grid", type=int, help=f"J, number of cells (0 = auto; default {DEFAULT_GRID})")
        sp.add_argument("--max-steps", type=int, dest="max_steps")
        sp.add_argument("--out", help="output directory (default $POT1D_OUT or .)")
        sp.add_argument("--timeseries", action="store_true", help="also write timeseries.csv")

    common(sub.add_parser("solve", help="time-march to the optimal map"))
    common(sub.add_parser("oracle", help="tabulate T = G^-1(F(x)) on the grid"))
    common(sub.add_parser("compare", help="solve and check against the oracle"))
    c = sub.add_parser("catalog", help="list the built-in examples")
    c.add_argument("--json", action="store_true", help="machine-readable output")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    if args.command == "catalog":
        return cmd_catalog(args.json)
    try:
        cfg = build_run_config(args)
        t0 = time.perf_counter()
        code = {"solve": cmd_solve, "oracle": cmd_oracle, "compare": cmd_compare}[args.command](cfg)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
        return code
    except (Pot1dError, ValueError, OSError) as exc:
        print(f"pot1d: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
