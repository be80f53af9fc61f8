import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pot1d import kernels
from pot1d.densities import (
    CATALOG_IDS,
    DensitySpec,
    bessel_i0,
    catalog,
    cdf,
    cdf_many,
    constant,
    custom_entry,
    extrema,
    integrate,
    piecewise_cubic,
    validate,
)
from pot1d.errors import DomainError, UnknownExampleError

Z = 3 * math.log(3) + 2


def test_uniform_cdf():
    d = constant(1.0, 0, 1)
    assert cdf(d, 0.5) == pytest.approx(0.5, abs=1e-14)
    assert cdf(d, 0.5, method="quadrature") == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("eid", CATALOG_IDS)
def test_cdf_at_left_end_is_zero(eid):
    e = catalog(eid)
    for d in (e.f, e.g):
        assert cdf(d, d.interval_lo) == 0.0
        assert cdf(d, d.interval_lo, method="quadrature") == 0.0


def test_piecewise_rectangles():
    f = catalog("ex_piecewise_const").f
    assert cdf(f, 0.0) == pytest.approx(0.45, abs=1e-14)
    assert cdf(f, 0.0, method="quadrature") == pytest.approx(0.45, abs=1e-10)


def test_cdf_domain_error():
    d = constant(0.5, -1, 1)
    with pytest.raises(DomainError):
        cdf(d, 1.5)
    with pytest.raises(DomainError):
        cdf_many(d, [0.0, -2.0])


def test_validate_examples():
    rep = validate(constant(1.0, 0, 1))
    assert rep.min_val == rep.max_val == 1.0 and rep.ok
    rep = validate(catalog("ex_near_zero").f)
    assert rep.min_val == pytest.approx(0.05) and rep.max_val == pytest.approx(0.95)
    assert rep.mass == pytest.approx(1.0, abs=1e-12) and rep.ok
    rep = validate(constant(1.0, 0, 2))
    assert rep.positive and not rep.unit_mass and not rep.ok


def test_validate_reports_nonpositive():
    rep = validate(piecewise_cubic(-1, 1, (), [(0.5, 0.6)]))
    assert not rep.positive and rep.unit_mass


@pytest.mark.parametrize("eid", CATALOG_IDS)
def test_catalog_entries_validate(eid):
    e = catalog(eid)
    for d in (e.f, e.g):
        rep = validate(d)
        assert rep.positive
        assert abs(rep.mass - 1) <= 1e-8


@pytest.mark.parametrize("eid", CATALOG_IDS)
def test_catalog_compatibility(eid):
    e = catalog(eid)
    assert e.u0_d1(e.f.interval_lo) == pytest.approx(e.g.interval_lo, abs=1e-14)
    assert e.u0_d1(e.f.interval_hi) == pytest.approx(e.g.interval_hi, abs=1e-14)
    x = np.linspace(e.f.interval_lo, e.f.interval_hi, 101)
    assert np.all(e.u0_d2(x) > 0)


def test_catalog_contents():
    e = catalog("ex_simple")
    for x in (-1.0, -0.3, 0.0, 0.7, 1.0):
        assert e.f(x) == pytest.approx((math.log(x + 2) + 2) / Z, rel=1e-14)
        assert e.g(x) == pytest.approx(x * x / 2 + 1 / 3, rel=1e-14)
    u = catalog("uniform_uniform")
    assert u.f(0.3) == u.g(-0.9) == 0.5
    assert u.u0(0.4) == pytest.approx(0.08)
    v = catalog("ex_vonmises_quantile")
    assert (v.f.interval_lo, v.f.interval_hi) == (0.0, 1.0)
    assert v.g.interval_lo == -math.pi and v.g.interval_hi == math.pi
    assert v.g(0.4) == pytest.approx(math.exp(math.cos(0.4)) / (2 * math.pi * bessel_i0(1.0)))
    assert v.u0(0.25) == pytest.approx(math.pi * (0.0625 - 0.25))


def test_unknown_id_lists_valid_ids():
    with pytest.raises(UnknownExampleError) as exc:
        catalog("nope")
    assert "ex_simple" in str(exc.value)
    assert isinstance(exc.value, KeyError)


def test_bessel_i0():
    # I0(1) to 16 digits
    assert bessel_i0(1.0) == pytest.approx(1.2660658777520082, rel=1e-15)
    assert bessel_i0(0.0) == 1.0


def test_extrema_examples():
    mn, mx, _, d1 = extrema(catalog("ex_simple").g)
    assert mn == pytest.approx(1 / 3, abs=1e-9) and mx == pytest.approx(5 / 6)
    assert d1 == pytest.approx(1.0)
    assert extrema(constant(0.5, -1, 1)) == (0.5, 0.5, 0.0, 0.0)
    s = math.sin(100) + 200
    mn, mx, _, _ = extrema(catalog("ex_highfreq_fwd").f)
    assert mn == pytest.approx(50 / s, rel=1e-6) and mx == pytest.approx(150 / s, rel=1e-6)


def test_left_continuity_at_breakpoints():
    f = catalog("ex_piecewise_const").f
    assert f(-0.5) == 0.3 and f(0.0) == 0.6 and f(0.5) == 0.2
    assert f(np.nextafter(0.5, 1)) == 0.9
    # both one-sided values are part of the sample set
    _, (v,) = f.sample(101)
    assert set(np.unique(v)) == {0.2, 0.3, 0.6, 0.9}


def test_density_spec_rejects_bad_layout():
    with pytest.raises(DomainError):
        DensitySpec(1, 0, (kernels.POLY,), ((1.0,),))
    with pytest.raises(DomainError):
        piecewise_cubic(0, 1, (0.5, 0.4), [(1,), (1,), (1,)])
    with pytest.raises(DomainError):
        piecewise_cubic(0, 1, (1.0,), [(1,), (1,)])
    with pytest.raises(DomainError):
        piecewise_cubic(0, 1, (0.5,), [(1,)])
    with pytest.raises(DomainError):
        DensitySpec(0, 1, (9,), ((1.0,),))


def test_density_is_immutable():
    d = catalog("ex_simple").f
    with pytest.raises(Exception):
        d.interval_lo = 0.0
    with pytest.raises(ValueError):
        d.kernel_args()[1][0, 0] = 1.0


def test_derivatives_match_finite_differences():
    h = 1e-5
    for eid in CATALOG_IDS:
        e = catalog(eid)
        for d in (e.f, e.g):
            lo, hi = d.interval_lo, d.interval_hi
            x = np.linspace(lo + 0.013 * (hi - lo), hi - 0.013 * (hi - lo), 37)
            x = x[np.min(np.abs(x[:, None] - np.asarray(d.breakpoints + (1e9,))), axis=1) > 2 * h]
            for k, (lower, upper) in enumerate([(d.eval, d.eval_d1), (d.eval_d1, d.eval_d2),
                                                (d.eval_d2, d.eval_d3)]):
                fd = (lower(x + h) - lower(x - h)) / (2 * h)
                scale = 1 + np.abs(upper(x)).max()
                np.testing.assert_allclose(upper(x), fd, atol=2e-4 * scale * (k + 1) ** 2,
                                           err_msg=f"{eid} order {k + 1}")


@pytest.mark.parametrize("eid", CATALOG_IDS)
def test_quadrature_matches_closed_form(eid):
    rng = np.random.default_rng(7)
    e = catalog(eid)
    for d in (e.f, e.g):
        if d.analytic_cdf is None:
            continue
        x = np.sort(rng.uniform(d.interval_lo, d.interval_hi, 100))
        quad = cdf_many(d, x, method="quadrature")
        np.testing.assert_allclose(quad, d.analytic_cdf(x), atol=1e-10)


def test_vonmises_cdf_symmetry():
    g = catalog("ex_vonmises_quantile").g
    assert g.analytic_cdf is None
    assert cdf(g, 0.0) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(DomainError):
        cdf(g, 0.0, method="analytic")


def test_breakpoint_split_matches_piecewise_sum():
    g = catalog("ex_piecewise_mixed").g
    exact = g.analytic_cdf(1.0)
    assert integrate(g, -1.0, 1.0) == pytest.approx(exact, abs=1e-12)
    assert integrate(g, -0.9, 0.8) == pytest.approx(g.analytic_cdf(0.8) - g.analytic_cdf(-0.9), abs=1e-12)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_cdf_nondecreasing(x1, x2):
    x1, x2 = min(x1, x2), max(x1, x2)
    for eid in ("ex_simple", "ex_piecewise_mixed", "ex_highfreq_fwd"):
        f = catalog(eid).f
        assert cdf(f, x1, method="quadrature") <= cdf(f, x2, method="quadrature") + 1e-10


def test_cdf_many_matches_scalar_and_ignores_order():
    g = catalog("ex_vonmises_quantile").g
    xs = np.array([2.0, -3.0, 0.5, 0.5, -1.0])
    out = cdf_many(g, xs)
    for x, v in zip(xs, out):
        assert v == pytest.approx(cdf(g, x), abs=1e-10)


def test_custom_entry_uses_affine_potential():
    f = piecewise_cubic(0, 2, (1.0,), [(0.25,), (0.75,)])
    g = constant(0.25, -1, 3)
    e = custom_entry(f, g)
    assert e.u0_d1(0.0) == pytest.approx(-1) and e.u0_d1(2.0) == pytest.approx(3)
    assert not e.is_smooth
