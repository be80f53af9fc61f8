"""Explicit time marching of the parabolic optimal transport flow.

Each step applies, for every node ``j = 0..J`` simultaneously,

    U_j <- U_j + dt * (log(lap U_j) - log(f(x_j) / g(grad U_j)))

and then resets the ghost nodes so the centered gradient equals ``C`` at
``A`` and ``D`` at ``B``.  The step size is recomputed every step from the
current minimum of ``lap U``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _accel, kernels
from .bounds import (
    apriori_boundary_bound,
    apriori_interior_bound,
    apriori_interior_bound_per_step,
)
from .densities import DEFAULT_QUAD_TOL, cdf_many
from .errors import ConvexityLossError, DomainError
from .grid_ops import apply_ghosts, lap_all
from .monitor import ConvergenceReport, error_values, map_error_bound, probe_indices

log = logging.getLogger(__name__)

DEFAULT_CADENCE = 200


@dataclass
class SolverState:
    step_index: int
    time: float
    row: np.ndarray
    min_lap: float
    dt_history: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class StepConfig:
    c_bc: float
    d_bc: float
    r_safety: float = 0.5
    max_dt: float = math.inf
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not 0.0 < self.r_safety <= 0.5:
            raise DomainError("r_safety must lie in (0, 0.5]")
        if not self.max_dt > 0:
            raise DomainError("max_dt must be positive")

    @classmethod
    def for_entry(cls, entry, **kw):
        return cls(entry.g.interval_lo, entry.g.interval_hi, **kw)


def initial_state(entry, grid, cfg):
    row = apply_ghosts(entry.u0(grid.nodes), grid, cfg.c_bc, cfg.d_bc)
    return SolverState(0, 0.0, row, float(lap_all(row, grid).min()))


def s_condition(db, dx):
    """Check that ``s < r`` can hold: ``max|g'| dx (delta1/2) / (2 min g) < 1``.

    Both ratios are linear in ``dt``, so shrinking ``dt`` cannot repair a
    violation; only a finer grid can.  Returns ``(ok, ratio)``.
    """
    ratio = db.max_g_d1 * dx * (0.5 * db.delta1) / (2.0 * db.min_g)
    return ratio < 1.0, ratio


def select_dt(state, db, cfg, dx):
    if not state.min_lap > 0:
        raise ConvexityLossError(f"discrete second derivative is {state.min_lap:g} <= 0",
                                 step=state.step_index)
    dt = min(cfg.r_safety * dx * dx * min(0.5 * db.delta1, state.min_lap), cfg.max_dt)
    if not dt >= 1e-300:
        raise DomainError(f"degenerate time step {dt!r}")
    return dt


def _raise_status(status, bad, step, entry):
    if status == kernels.CONVEXITY_LOSS:
        raise ConvexityLossError(f"convexity lost at step {step}, j={bad}", step=step, j=bad)
    if status == kernels.TARGET_NONPOSITIVE:
        raise DomainError(f"g(grad U) <= 0 at step {step}, j={bad}: map left "
                          f"[{entry.g.interval_lo}, {entry.g.interval_hi}]")
    if status == kernels.NONFINITE:
        raise DomainError(f"non-finite value at step {step}, j={bad}")
    if status == kernels.DEGENERATE_DT:
        raise DomainError(f"degenerate time step at step {step}")


def _log_f(entry, grid):
    fx = entry.f.eval(grid.interior)
    if not fx.min() > 0:
        raise DomainError("f must be positive on the grid")
    return np.log(fx)


def step(state, entry, db, cfg, grid, backend=None):
    """One explicit step from ``state``; the input state is left untouched."""
    select_dt(state, db, cfg, grid.dx)
    row = state.row.copy()
    kinds, params, breaks = entry.g.kernel_args()
    dts = np.empty(1)
    n, t, status, bad, min_lap, _, _ = kernels.advance(
        row, _log_f(entry, grid), grid.dx, cfg.c_bc, cfg.d_bc, kinds, params, breaks, 1,
        cfg.r_safety, 0.5 * db.delta1, cfg.max_dt, state.time, math.inf, dts, backend=backend)
    if n != 1 or status not in (kernels.OK, kernels.CONVEXITY_LOSS):
        _raise_status(status, bad, state.step_index, entry)
    return SolverState(state.step_index + 1, t, row, float(min_lap),
                       np.append(state.dt_history, dts[0]))


def run(entry, db, cfg, grid, stop, quad_tol=DEFAULT_QUAD_TOL, cadence=DEFAULT_CADENCE,
        t_end=None, backend=None, progress=None):
    """March until the stopping rule fires, ``max_steps`` is hit or ``t_end`` is reached.

    Every ``cadence`` steps the CDF mismatch is measured on the probe subset;
    once the probes are within ``stop.sigma`` a full-grid pass at
    ``quad_tol / 10`` must confirm before the run counts as converged.
    ``progress`` is called with each checkpoint record.
    Returns ``(state, report)``.
    """
    backend = backend or _accel.backend_name()
    start = time.perf_counter()
    state = initial_state(entry, grid, cfg)
    if not state.min_lap > 0:
        raise ConvexityLossError("initial potential is not discretely convex", step=0)
    J = grid.j_count
    probes = probe_indices(J, stop.check_subset or max(2, J // 16))
    f_cdf = cdf_many(entry.f, grid.interior, quad_tol)
    f_cdf_fine = cdf_many(entry.f, grid.interior, quad_tol / 10.0)
    logf = _log_f(entry, grid)
    kinds, params, breaks = entry.g.kernel_args()
    t_stop = math.inf if t_end is None else float(t_end)
    row = state.row
    t = 0.0
    steps = 0
    chunks = []
    timeseries = []
    excursions = 0
    min_lap = state.min_lap
    min_lap_seen = min_lap
    mono_ok = True
    converged = False
    last_dt = 0.0

    def checkpoint():
        nonlocal excursions
        e, exc = error_values(entry, row, grid, probes, quad_tol, f_cdf)
        excursions += exc
        rec = (steps, t, last_dt, float(e.max()), min_lap)
        timeseries.append(rec)
        if progress is not None:
            progress(rec)
        if rec[3] > stop.sigma:
            return False
        if not stop.full_confirm:
            return True
        e_full, exc = error_values(entry, row, grid, None, quad_tol / 10.0, f_cdf_fine)
        excursions += exc
        return float(e_full.max()) <= stop.sigma

    converged = checkpoint() if t_end is None else False
    while not converged and steps < cfg.max_steps and t < t_stop:
        n = min(cadence, cfg.max_steps - steps)
        buf = np.empty(n)
        n_done, t, status, bad, min_lap, seen, mono = kernels.advance(
            row, logf, grid.dx, cfg.c_bc, cfg.d_bc, kinds, params, breaks, n, cfg.r_safety,
            0.5 * db.delta1, cfg.max_dt, t, t_stop, buf, backend=backend)
        chunks.append(buf[:n_done])
        steps += n_done
        if n_done:
            last_dt = float(buf[n_done - 1])
        min_lap_seen = min(min_lap_seen, seen)
        mono_ok = mono_ok and bool(mono)
        if status != kernels.OK:
            _raise_status(status, bad, steps, entry)
        if t_end is None:
            converged = checkpoint()
        else:
            timeseries.append((steps, t, last_dt, math.nan, min_lap))

    dts = np.concatenate(chunks) if chunks else np.empty(0)
    state = SolverState(steps, t, row, float(min_lap), dts)
    e_full, exc = error_values(entry, row, grid, None, quad_tol / 10.0, f_cdf_fine)
    excursions += exc
    s_ok, s_ratio = s_condition(db, grid.dx)
    if not s_ok:
        log.warning("s < r cannot hold at dx=%g (ratio %.3g); refine the grid", grid.dx, s_ratio)
    bound = map_error_bound(stop.sigma, entry)
    apri = apriori_interior_bound(db, dts, grid.dx) if steps else 0.0
    report = ConvergenceReport(
        converged=bool(converged),
        iterations=steps,
        t_total=t,
        max_E_final=float(e_full.max()),
        map_error_bound=bound,
        apriori_interior=apri,
        apriori_boundary=apriori_boundary_bound(db, dts, grid.dx) if steps else 0.0,
        wall_seconds=time.perf_counter() - start,
        bounds_provenance=dict(db.provenance),
        sigma=stop.sigma,
        extra={
            "apriori_interior_per_step":
                apriori_interior_bound_per_step(db, dts, grid.dx) if steps else 0.0,
            "apriori_boundary_factor1":
                apriori_boundary_bound(db, dts, grid.dx, factor=1.0) if steps else 0.0,
            "bounds_heuristic": db.heuristic,
            "j_count": J,
            "dx": grid.dx,
            "quad_tol": quad_tol,
            "cadence": cadence,
            "probe_count": int(probes.size),
            "min_lap_final": float(min_lap),
            "min_lap_seen": float(min_lap_seen),
            "monotone_every_step": mono_ok,
            "excursions": excursions,
            "s_condition_ok": bool(s_ok),
            "s_condition_ratio": s_ratio,
            "backend": backend,
        },
        timeseries=timeseries,
    )
    return state, report
