import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pot1d.bounds import DerivativeBounds, derive_bounds
from pot1d.densities import CATALOG_IDS, CatalogEntry, QuadraticPotential, catalog
from pot1d.errors import ConvexityLossError, DomainError
from pot1d.grid_ops import build_grid, grad_centered, lap_all
from pot1d.monitor import StoppingRule, monotonicity_check
from pot1d.stepper import (
    SolverState,
    StepConfig,
    initial_state,
    run,
    s_condition,
    select_dt,
    step,
)

SMOOTH = [e for e in CATALOG_IDS if catalog(e).is_smooth]


def _db(delta1=1.0, **kw):
    base = dict(delta1=delta1, delta2=max(delta1, 2.0), psi=0.0, gamma=0.0, k_tt=0.0,
                min_g=0.5, max_g=0.5, max_g_d1=0.0, max_vt0=0.0)
    base.update(kw)
    return DerivativeBounds(**base)


def _state(min_lap):
    return SolverState(0, 0.0, np.zeros(7), min_lap)


def _setup(eid, j_count=32):
    e = catalog(eid)
    g = build_grid(e.f.interval_lo, e.f.interval_hi, j_count)
    return e, derive_bounds(e), StepConfig.for_entry(e), g


def test_step_config_invariants():
    for r in (0.0, 0.6, -0.1):
        with pytest.raises(DomainError):
            StepConfig(-1, 1, r_safety=r)
    with pytest.raises(DomainError):
        StepConfig(-1, 1, max_dt=0.0)


def test_select_dt_examples():
    cfg = StepConfig(-1, 1)
    assert select_dt(_state(1.0), _db(), cfg, 0.01) == pytest.approx(2.5e-5, rel=1e-12)
    quarter = StepConfig(-1, 1, r_safety=0.25)
    assert select_dt(_state(1.0), _db(), quarter, 0.01) == pytest.approx(1.25e-5, rel=1e-12)
    assert select_dt(_state(0.1), _db(), cfg, 0.01) == pytest.approx(5e-6, rel=1e-12)
    capped = StepConfig(-1, 1, max_dt=1e-7)
    assert select_dt(_state(1.0), _db(), capped, 0.01) == 1e-7


def test_select_dt_errors():
    with pytest.raises(ConvexityLossError):
        select_dt(_state(0.0), _db(), StepConfig(-1, 1), 0.01)
    with pytest.raises(ConvexityLossError):
        select_dt(_state(-1.0), _db(), StepConfig(-1, 1), 0.01)
    with pytest.raises(DomainError):
        select_dt(_state(1.0), _db(), StepConfig(-1, 1), 1e-160)


def test_s_condition():
    ok, ratio = s_condition(_db(max_g_d1=1.0, min_g=0.5), 0.01)
    assert ok and ratio == pytest.approx(1.0 * 0.01 * 0.5 / 1.0)
    assert not s_condition(_db(max_g_d1=1000.0, min_g=0.5), 0.1)[0]


def test_uniform_is_stationary():
    e, db, cfg, g = _setup("uniform_uniform")
    s0 = initial_state(e, g, cfg)
    s1 = step(s0, e, db, cfg, g)
    np.testing.assert_allclose(s1.row, s0.row, atol=1e-15, rtol=0)
    assert s1.step_index == 1 and s1.dt_history.size == 1


def test_step_does_not_mutate_input():
    e, db, cfg, g = _setup("ex_simple")
    s0 = initial_state(e, g, cfg)
    before = s0.row.copy()
    step(s0, e, db, cfg, g)
    np.testing.assert_array_equal(s0.row, before)


def test_one_step_of_simple_by_hand():
    e, db, cfg, g = _setup("ex_simple", 40)
    s0 = initial_state(e, g, cfg)
    s1 = step(s0, e, db, cfg, g)
    dt = s1.dt_history[0]
    assert dt == pytest.approx(0.5 * g.dx**2 * min(db.delta1 / 2, 1.0), rel=1e-12)
    x = g.interior
    expected = dt * (0.0 - np.log(e.f(x) / e.g(x))) + 0.5 * x**2
    np.testing.assert_allclose(s1.row[1:-1], expected, atol=1e-14)
    assert s1.time == dt


@given(st.floats(-50, 50), st.sampled_from(["ex_simple", "ex_piecewise_mixed", "ex_highfreq_fwd"]))
def test_translation_equivariance(c, eid):
    # odd J keeps grad U off the jumps of g at +-1/3, where a one-ulp change
    # in the gradient legitimately switches pieces
    e, db, cfg, g = _setup(eid, 25)
    s0 = initial_state(e, g, cfg)
    shifted = SolverState(0, 0.0, s0.row + c, s0.min_lap)
    a = step(s0, e, db, cfg, g)
    b = step(shifted, e, db, cfg, g)
    np.testing.assert_allclose(b.row - c, a.row, atol=1e-13, rtol=0)


def test_run_uniform_converges_immediately():
    e, db, cfg, g = _setup("uniform_uniform", 64)
    state, rep = run(e, db, cfg, g, StoppingRule(1e-3))
    assert rep.converged and rep.iterations == 0 and rep.t_total == 0.0
    assert rep.apriori_interior == 0.0 and state.dt_history.size == 0


def test_run_truncated():
    e, db, _, g = _setup("ex_simple", 64)
    cfg = StepConfig.for_entry(e, max_steps=10)
    state, rep = run(e, db, cfg, g, StoppingRule(1e-9))
    assert not rep.converged and rep.iterations == 10
    assert state.dt_history.size == 10
    assert state.time == pytest.approx(state.dt_history.sum(), rel=1e-14)
    assert rep.apriori_interior > 0 and rep.apriori_boundary > 0


def test_run_deterministic():
    e, db, _, g = _setup("ex_highfreq_fwd", 64)
    cfg = StepConfig.for_entry(e, max_steps=3000)
    a, _ = run(e, db, cfg, g, StoppingRule(1e-9))
    b, _ = run(e, db, cfg, g, StoppingRule(1e-9))
    np.testing.assert_array_equal(a.row, b.row)
    np.testing.assert_array_equal(a.dt_history, b.dt_history)


def test_run_to_fixed_time():
    e, db, cfg, g = _setup("ex_simple", 32)
    state, rep = run(e, db, cfg, g, StoppingRule(0.01), t_end=0.05)
    assert state.time == 0.05 and rep.t_total == 0.05
    assert not rep.converged
    assert state.time == pytest.approx(state.dt_history.sum(), rel=1e-12)
    assert all(math.isnan(r[3]) for r in rep.timeseries)


@pytest.mark.parametrize("eid", SMOOTH)
def test_invariants_along_smooth_runs(eid):
    e, db, _, g = _setup(eid, 48)
    cfg = StepConfig.for_entry(e, max_steps=4000)
    seen = []
    state, rep = run(e, db, cfg, g, StoppingRule(1e-12), cadence=250,
                     progress=lambda rec: seen.append(rec))
    assert rep.extra["monotone_every_step"]
    assert rep.extra["min_lap_seen"] > 0.5 * db.delta1 * 0.95
    assert grad_centered(state.row, g, 0) == pytest.approx(e.g.interval_lo, abs=1e-12)
    assert grad_centered(state.row, g, g.j_count) == pytest.approx(e.g.interval_hi, abs=1e-12)
    assert monotonicity_check(state.row, g)[0]
    assert len(seen) == len(rep.timeseries) and seen[0][0] == 0


def test_step_preserves_neumann():
    e, db, cfg, g = _setup("ex_piecewise_mixed", 32)
    s = initial_state(e, g, cfg)
    for _ in range(25):
        s = step(s, e, db, cfg, g)
        assert grad_centered(s.row, g, 0) == pytest.approx(-1.0, abs=1e-13)
        assert grad_centered(s.row, g, 32) == pytest.approx(1.0, abs=1e-13)
        assert s.min_lap == pytest.approx(lap_all(s.row, g).min(), rel=1e-12)


def test_nonconvex_start_raises():
    u = catalog("uniform_uniform")
    bad = CatalogEntry("bad", u.f, u.g, QuadraticPotential(-0.5))
    db = derive_bounds(u)
    g = build_grid(-1, 1, 16)
    with pytest.raises(ConvexityLossError):
        run(bad, db, StepConfig(1.0, -1.0), g, StoppingRule(0.01))


def test_step_rejects_nonconvex_state():
    e, db, cfg, g = _setup("ex_simple", 16)
    s = initial_state(e, g, cfg)
    s.row[9] += 10.0
    s = SolverState(0, 0.0, s.row, float(lap_all(s.row, g).min()))
    with pytest.raises(ConvexityLossError):
        step(s, e, db, cfg, g)


def test_converged_report_fields():
    e, db, cfg, g = _setup("ex_piecewise_mixed", 64)
    _, rep = run(e, db, cfg, g, StoppingRule(0.02))
    assert rep.converged and rep.max_E_final <= 0.02
    assert rep.map_error_bound == pytest.approx(0.02 / 0.4, rel=1e-6)
    assert rep.extra["backend"] in ("numba", "numpy")
    assert rep.extra["apriori_boundary_factor1"] < rep.apriori_boundary
    assert rep.bounds_provenance["gamma"] == "user_supplied"
