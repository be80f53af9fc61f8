"""Source/target densities, their CDFs, and the built-in example catalog."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, UnknownExampleError
from .kernels import COS, EXPCOS, LOG, POLY

DEFAULT_QUAD_TOL = 1e-10
DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class DensitySpec:
    """A positive density on ``[interval_lo, interval_hi]``.

    The density is piecewise: ``kinds[i]``/``params[i]`` describe the closed
    form on the ``i``-th piece (see :mod:`pot1d.kernels` for the kinds) and
    ``breakpoints`` separates the pieces.  A value exactly at a breakpoint
    belongs to the piece on its left.
    """

    interval_lo: float
    interval_hi: float
    kinds: tuple
    params: tuple
    breakpoints: tuple = ()
    label: str = ""
    _kinds: np.ndarray = field(init=False, repr=False, compare=False)
    _params: np.ndarray = field(init=False, repr=False, compare=False)
    _breaks: np.ndarray = field(init=False, repr=False, compare=False)
    _edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = float(self.interval_lo), float(self.interval_hi)
        if not hi > lo:
            raise DomainError(f"empty interval [{lo}, {hi}]")
        bps = tuple(float(b) for b in self.breakpoints)
        if any(b1 <= b0 for b0, b1 in zip(bps, bps[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        if bps and not (lo < bps[0] and bps[-1] < hi):
            raise DomainError("breakpoints must lie strictly inside the interval")
        if len(self.kinds) != len(bps) + 1 or len(self.params) != len(self.kinds):
            raise DomainError("need exactly one (kind, params) pair per piece")
        params = np.zeros((len(self.kinds), 4))
        for i, p in enumerate(self.params):
            params[i, : len(p)] = p
        kinds = np.asarray(self.kinds, dtype=np.int64)
        if not np.isin(kinds, (POLY, LOG, COS, EXPCOS)).all():
            raise DomainError(f"unknown piece kind in {self.kinds}")
        params.setflags(write=False)
        kinds.setflags(write=False)
        breaks = np.asarray(bps, dtype=float).reshape(-1)
        edges = np.concatenate(([lo], breaks, [hi]))
        for arr in (breaks, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "interval_lo", lo)
        object.__setattr__(self, "interval_hi", hi)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "_kinds", kinds)
        object.__setattr__(self, "_params", params)
        object.__setattr__(self, "_breaks", breaks)
        object.__setattr__(self, "_edges", edges)

    # -- evaluation -------------------------------------------------------

    def _eval(self, x, deriv):
        x_arr = np.asarray(x, dtype=float)
        out = kernels.pw_eval_numpy(self._kinds, self._params, self._breaks,
                                    x_arr.reshape(-1), deriv)
        return out.reshape(x_arr.shape) if x_arr.ndim else float(out[0])

    def eval(self, x):
        return self._eval(x, 0)

    def eval_d1(self, x):
        return self._eval(x, 1)

    def eval_d2(self, x):
        return self._eval(x, 2)

    def eval_d3(self, x):
        return self._eval(x, 3)

    __call__ = eval

    @property
    def n_pieces(self):
        return len(self.kinds)

    @property
    def edges(self):
        return self._edges

    @property
    def is_smooth(self):
        return not self.breakpoints

    def kernel_args(self):
        """``(kinds, params, breaks)`` arrays for the compiled kernels."""
        return self._kinds, self._params, self._breaks

    # -- closed-form CDF --------------------------------------------------

    @property
    def analytic_cdf(self):
        """Exact CDF as a callable, or ``None`` when a piece has no antiderivative."""
        if EXPCOS in self.kinds:
            return None
        return self._analytic_cdf

    def _analytic_cdf(self, x):
        x_arr = np.asarray(x, dtype=float).reshape(-1)
        edges = self._edges
        prims = [
            (lambda t, k=k, p=p: kernels.piece_antiderivative(k, p, t))
            for k, p in zip(self._kinds, self._params)
        ]
        offsets = np.zeros(self.n_pieces)
        for i in range(1, self.n_pieces):
            offsets[i] = offsets[i - 1] + prims[i - 1](edges[i]) - prims[i - 1](edges[i - 1])
        idx = np.searchsorted(self._breaks, x_arr, side="left")
        out = np.empty_like(x_arr)
        for i in range(self.n_pieces):
            m = idx == i
            if m.any():
                out[m] = offsets[i] + prims[i](x_arr[m]) - prims[i](edges[i])
        return out if np.ndim(x) else float(out[0])

    # -- sampling -----------------------------------------------------------

    def sample(self, n_samples, derivs=(0,)):
        """Sample every piece on its own closed sub-interval.

        About ``n_samples`` points are spread over the interval in proportion
        to piece length; breakpoints appear once per adjacent piece so that
        both one-sided values are seen.  Returns ``(x, [values per deriv])``.
        """
        if n_samples < 2:
            raise DomainError("n_samples must be >= 2")
        span = self.interval_hi - self.interval_lo
        xs, vals = [], [[] for _ in derivs]
        empty = np.empty(0)
        for i in range(self.n_pieces):
            a, b = self._edges[i], self._edges[i + 1]
            n = max(2, int(math.ceil(n_samples * (b - a) / span)))
            x = a + (b - a) * np.arange(n) / (n - 1)
            x[-1] = b
            xs.append(x)
            for slot, d in zip(vals, derivs):
                slot.append(kernels.pw_eval_numpy(self._kinds[i:i + 1], self._params[i:i + 1],
                                                  empty, x, d))
        return np.concatenate(xs), [np.concatenate(v) for v in vals]


@dataclass(frozen=True)
class QuadraticPotential:
    """``u0(x) = a2 x^2 + a1 x + a0``, the initial convex potential."""

    a2: float
    a1: float = 0.0
    a0: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.a0 + x * (self.a1 + x * self.a2)

    def d1(self, x):
        return self.a1 + 2.0 * self.a2 * np.asarray(x, dtype=float)

    def d2(self, x):
        return np.full_like(np.asarray(x, dtype=float), 2.0 * self.a2)

    def d3(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    f: DensitySpec
    g: DensitySpec
    potential: QuadraticPotential
    notes: str = ""

    def u0(self, x):
        return self.potential(x)

    def u0_d1(self, x):
        return self.potential.d1(x)

    def u0_d2(self, x):
        return self.potential.d2(x)

    def u0_d3(self, x):
        return self.potential.d3(x)

    @property
    def is_smooth(self):
        return self.f.is_smooth and self.g.is_smooth


@dataclass
class ValidationReport:
    min_val: float
    max_val: float
    mass: float
    positive: bool
    unit_mass: bool
    quad_tol: float

    @property
    def ok(self):
        return self.positive and self.unit_mass


# ---------------------------------------------------------------------------
# CDFs


def integrate(d, a, b, quad_tol=DEFAULT_QUAD_TOL):
    """Adaptive composite Simpson integral of ``d`` over ``[a, b]``."""
    kinds, params, _ = d.kernel_args()
    return kernels.integrate(kinds, params, d.edges, a, b, quad_tol)


def _check_in(d, x):
    if not (d.interval_lo <= x <= d.interval_hi):
        raise DomainError(f"x={x!r} outside [{d.interval_lo}, {d.interval_hi}]")


def cdf(d, x, quad_tol=DEFAULT_QUAD_TOL, method="auto"):
    """Cumulative mass of ``d`` on ``[interval_lo, x]``.

    ``method`` is ``"auto"`` (closed form when available), ``"analytic"`` or
    ``"quadrature"``.
    """
    if quad_tol <= 0:
        raise DomainError("quad_tol must be positive")
    x = float(x)
    _check_in(d, x)
    if method != "quadrature" and d.analytic_cdf is not None:
        return float(d.analytic_cdf(x))
    if method == "analytic":
        raise DomainError("no closed-form CDF for this density")
    return integrate(d, d.interval_lo, x, quad_tol)


def cdf_many(d, xs, quad_tol=DEFAULT_QUAD_TOL, method="auto"):
    """Vectorized :func:`cdf`.

    The quadrature path sorts the points and integrates only between
    consecutive ones, so a sweep costs one pass over the interval.
    """
    xs = np.asarray(xs, dtype=float)
    flat = xs.reshape(-1)
    if flat.size and (flat.min() < d.interval_lo or flat.max() > d.interval_hi):
        raise DomainError("points outside the density interval")
    if method != "quadrature" and d.analytic_cdf is not None:
        return np.asarray(d.analytic_cdf(flat)).reshape(xs.shape)
    order = np.argsort(flat, kind="stable")
    span = d.interval_hi - d.interval_lo
    out = np.empty_like(flat)
    acc, prev = 0.0, d.interval_lo
    for k in order:
        x = flat[k]
        if x > prev:
            acc += integrate(d, prev, x, quad_tol * (x - prev) / span)
            prev = x
        out[k] = acc
    return out.reshape(xs.shape)


# ---------------------------------------------------------------------------
# validation and extrema


def validate(d, n_samples=1001, quad_tol=DEFAULT_QUAD_TOL):
    """Check positivity and unit mass; failures are reported, never raised."""
    _, (vals,) = d.sample(n_samples)
    mass = cdf(d, d.interval_hi, quad_tol, method="quadrature")
    return ValidationReport(
        min_val=float(vals.min()),
        max_val=float(vals.max()),
        mass=mass,
        positive=bool(vals.min() > 0.0),
        unit_mass=abs(mass - 1.0) <= 10.0 * quad_tol,
        quad_tol=quad_tol,
    )


def extrema(d, n_samples=DEFAULT_SAMPLES):
    """Sampled ``(min f, max f, min |f'|, max |f'|)``.

    Raw sampled values; callers apply their own safety factors.
    """
    _, (v, d1) = d.sample(n_samples, derivs=(0, 1))
    a = np.abs(d1)
    return float(v.min()), float(v.max()), float(a.min()), float(a.max())


# ---------------------------------------------------------------------------
# catalog


def bessel_i0(x, tol=1e-16):
    """Modified Bessel function I0 by its power series."""
    q = 0.25 * x * x
    term, total, k = 1.0, 1.0, 0
    while term > tol * total:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def constant(value, lo, hi, label=""):
    return DensitySpec(lo, hi, (POLY,), ((value,),), label=label)


def piecewise_cubic(lo, hi, breakpoints, coeffs, label=""):
    """Piecewise cubic density; ``coeffs[i] = (c0, c1, c2, c3)`` on piece ``i``."""
    return DensitySpec(lo, hi, (POLY,) * len(coeffs), tuple(tuple(c) for c in coeffs),
                       tuple(breakpoints), label=label)


def linear_map_potential(f, g):
    """Quadratic potential whose derivative maps [A, B] affinely onto [C, D]."""
    a, b, c, d = f.interval_lo, f.interval_hi, g.interval_lo, g.interval_hi
    slope = (d - c) / (b - a)
    return QuadraticPotential(0.5 * slope, c - slope * a)


def _simple():
    z = 3.0 * math.log(3.0) + 2.0
    f = DensitySpec(-1, 1, (LOG,), ((1.0 / z, 2.0, 2.0 / z),), label="(log(x+2)+2)/(3 log 3+2)")
    g = DensitySpec(-1, 1, (POLY,), ((1.0 / 3.0, 0.0, 0.5),), label="x^2/2+1/3")
    return f, g


def _highfreq():
    a = 50.0 / (math.sin(100.0) + 200.0)
    hf = DensitySpec(-1, 1, (COS,), ((a, 100.0, 2.0),), label="50(cos(100x)+2)/(sin(100)+200)")
    lin = DensitySpec(-1, 1, (POLY,), ((0.5, 0.25),), label="(x+2)/4")
    return hf, lin


def _build(entry_id):
    half = QuadraticPotential(0.5)
    if entry_id == "uniform_uniform":
        u = constant(0.5, -1, 1, "1/2")
        return CatalogEntry(entry_id, u, u, half, "identity transport")
    if entry_id == "ex_simple":
        f, g = _simple()
        return CatalogEntry(entry_id, f, g, half, "logarithmic source, quadratic target")
    if entry_id == "ex_highfreq_fwd":
        hf, lin = _highfreq()
        return CatalogEntry(entry_id, hf, lin, half, "high-frequency source, linear target")
    if entry_id == "ex_highfreq_inv":
        hf, lin = _highfreq()
        return CatalogEntry(entry_id, lin, hf, half, "linear source, high-frequency target")
    if entry_id == "ex_vonmises_quantile":
        f = constant(1.0, 0, 1, "1")
        g = DensitySpec(-math.pi, math.pi, (EXPCOS,),
                        ((1.0 / (2.0 * math.pi * bessel_i0(1.0)), 1.0),),
                        label="exp(cos x)/(2 pi I0(1))")
        return CatalogEntry(entry_id, f, g, QuadraticPotential(math.pi, -math.pi),
                            "von Mises quantile function (mu=0, kappa=1)")
    if entry_id == "ex_near_zero":
        f = DensitySpec(-1, 1, (POLY,), ((0.5, 0.45),), label="(9/20)x+1/2")
        return CatalogEntry(entry_id, f, constant(0.5, -1, 1, "1/2"), half,
                            "source density close to zero at x=-1")
    if entry_id == "ex_piecewise_const":
        f = piecewise_cubic(-1, 1, (-0.5, 0.0, 0.5), ((0.3,), (0.6,), (0.2,), (0.9,)),
                            label="0.3/0.6/0.2/0.9 on quarters")
        return CatalogEntry(entry_id, f, constant(0.5, -1, 1, "1/2"), half,
                            "piecewise constant source")
    if entry_id == "ex_piecewise_mixed":
        c = 13.0 / 12.0 - math.log(2.0)
        f = DensitySpec(-1, 1, (LOG, POLY), ((0.5, 2.0, c), (1.0 / 3.0, 0.0, 0.25)), (0.0,),
                        label="log(x+2)/2+13/12-log 2 | x^2/4+1/3")
        g = piecewise_cubic(-1, 1, (-1.0 / 3.0, 1.0 / 3.0), ((0.7, 0.3), (0.5,), (0.7, -0.3)),
                            label="0.3x+0.7 | 1/2 | -0.3x+0.7")
        return CatalogEntry(entry_id, f, g, half, "piecewise source and target")
    raise UnknownExampleError(
        f"unknown example {entry_id!r}; valid ids: {', '.join(CATALOG_IDS)}")


CATALOG_IDS = (
    "uniform_uniform",
    "ex_simple",
    "ex_highfreq_fwd",
    "ex_highfreq_inv",
    "ex_vonmises_quantile",
    "ex_near_zero",
    "ex_piecewise_const",
    "ex_piecewise_mixed",
)

_CACHE = {}


def catalog(entry_id):
    """Return the built-in example ``entry_id``."""
    if entry_id not in _CACHE:
        _CACHE[entry_id] = _build(entry_id)
    return _CACHE[entry_id]


def custom_entry(f, g, entry_id="custom"):
    return CatalogEntry(entry_id, f, g, linear_map_potential(f, g), "user-supplied densities")
