"""Reference optimal map ``T = G^{-1} o F`` by quadrature and bisection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import DEFAULT_QUAD_TOL, cdf_many, integrate
from .errors import DomainError

DEFAULT_INV_TOL = 1e-12
_MAX_BISECT = 200


class _IncrementalCdf:
    """CDF of ``d`` evaluated relative to a known anchor point.

    With a closed form this is just the closed form; otherwise only the mass
    between the anchor and the query point is integrated.
    """

    def __init__(self, d, quad_tol):
        self.d = d
        self.exact = d.analytic_cdf
        self.span = d.interval_hi - d.interval_lo
        self.quad_tol = quad_tol

    def __call__(self, y, anchor, anchor_val):
        if self.exact is not None:
            return float(self.exact(y))
        if y >= anchor:
            return anchor_val + integrate(self.d, anchor, y, self.quad_tol * (y - anchor) / self.span)
        return anchor_val - integrate(self.d, y, anchor, self.quad_tol * (anchor - y) / self.span)


def _bisect(gcdf, p, lo, g_lo, hi, inv_tol):
    for _ in range(_MAX_BISECT):
        if hi - lo <= inv_tol:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        g_mid = gcdf(mid, lo, g_lo)
        if g_mid < p:
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi), lo, g_lo


def invert_cdf(g_density, p, inv_tol=DEFAULT_INV_TOL, quad_tol=DEFAULT_QUAD_TOL):
    """Quantile of ``g_density``: ``y`` in [C, D] with ``G(y) = p``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p!r} outside [0, 1]")
    c, d = g_density.interval_lo, g_density.interval_hi
    if p == 0.0:
        return c
    if p == 1.0:
        return d
    y, _, _ = _bisect(_IncrementalCdf(g_density, quad_tol), p, c, 0.0, d, inv_tol)
    return y


@dataclass(frozen=True)
class OptimalMap:
    entry: object
    inv_tol: float = DEFAULT_INV_TOL
    quad_tol: float = DEFAULT_QUAD_TOL

    def __post_init__(self):
        if not (self.inv_tol > 0 and self.quad_tol > 0):
            raise DomainError("inv_tol and quad_tol must be positive")

    def __call__(self, x):
        if np.ndim(x):
            return map_many(self, x)
        return optimal_map(self, x)


def optimal_map(om, x):
    f = om.entry.f
    x = float(x)
    if not f.interval_lo <= x <= f.interval_hi:
        raise DomainError(f"x={x!r} outside [{f.interval_lo}, {f.interval_hi}]")
    return float(map_many(om, np.array([x]))[0])


def map_many(om, xs):
    """Optimal map at every point of ``xs``, swept in increasing order.

    Each bisection starts from the previous root, so quadrature never
    revisits mass already accounted for.
    """
    f, g = om.entry.f, om.entry.g
    xs = np.asarray(xs, dtype=float)
    flat = xs.reshape(-1)
    ps = np.clip(cdf_many(f, flat, om.quad_tol), 0.0, 1.0)
    gcdf = _IncrementalCdf(g, om.quad_tol)
    out = np.empty_like(flat)
    lo, g_lo = g.interval_lo, 0.0
    for k in np.argsort(flat, kind="stable"):
        x, p = flat[k], ps[k]
        if x <= f.interval_lo or p <= 0.0:
            out[k] = g.interval_lo
        elif x >= f.interval_hi or p >= 1.0:
            out[k] = g.interval_hi
        else:
            out[k], lo, g_lo = _bisect(gcdf, p, lo, g_lo, g.interval_hi, om.inv_tol)
    return out.reshape(xs.shape)
