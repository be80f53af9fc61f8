"""CDF-mismatch error, stopping rule and structural checks on grid rows."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .densities import DEFAULT_QUAD_TOL, DEFAULT_SAMPLES, cdf, cdf_many, extrema
from .errors import DomainError
from .grid_ops import grad_all, grad_centered, lap_all


@dataclass(frozen=True)
class StoppingRule:
    sigma: float
    check_subset: int = 0  # 0 picks J // 16 at run time
    full_confirm: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.check_subset and self.check_subset < 2:
            raise DomainError("check_subset must be >= 2")


@dataclass
class ConvergenceReport:
    converged: bool
    iterations: int
    t_total: float
    max_E_final: float
    map_error_bound: float
    apriori_interior: float
    apriori_boundary: float
    wall_seconds: float
    bounds_provenance: dict
    oracle_max_err: float | None = None
    sigma: float = 0.0
    extra: dict = field(default_factory=dict)
    timeseries: list = field(default_factory=list, repr=False)

    def to_dict(self, with_timeseries=False):
        out = asdict(self)
        if not with_timeseries:
            out.pop("timeseries")
        return out


def probe_indices(j_count, count):
    """Evenly spaced indices in ``0..J`` that always include both ends."""
    count = max(2, min(int(count), j_count + 1))
    return np.unique(np.rint(np.linspace(0, j_count, count)).astype(np.int64))


def _clamped_grad(entry, row, g, js):
    s = grad_all(row, g)[js]
    lo, hi = entry.g.interval_lo, entry.g.interval_hi
    slack = 1e-12 * max(1.0, hi - lo)  # rounding at the Neumann nodes is not an excursion
    out = (s < lo - slack) | (s > hi + slack)
    return np.clip(s, lo, hi), int(out.sum())


def error_values(entry, row, g, js=None, quad_tol=DEFAULT_QUAD_TOL, f_cdf=None):
    """``E_j = |F(x_j) - G(grad U_j)|`` at the indices ``js``.

    Gradients outside [C, D] are clamped before evaluating G; the number of
    clamped entries is returned alongside the errors.  ``f_cdf`` may carry
    precomputed ``F(x_j)`` for every ``j = 0..J``.
    """
    js = np.arange(g.j_count + 1) if js is None else np.asarray(js, dtype=np.int64)
    s, excursions = _clamped_grad(entry, row, g, js)
    if f_cdf is None:
        fx = cdf_many(entry.f, g.interior[js], quad_tol)
    else:
        fx = np.asarray(f_cdf)[js]
    return np.abs(fx - cdf_many(entry.g, s, quad_tol)), excursions


def error_function(entry, row, g, j, quad_tol=DEFAULT_QUAD_TOL):
    s = min(max(grad_centered(row, g, j), entry.g.interval_lo), entry.g.interval_hi)
    return abs(cdf(entry.f, g.interior[j], quad_tol) - cdf(entry.g, s, quad_tol))


def max_error(entry, row, g, probe_js, quad_tol=DEFAULT_QUAD_TOL, f_cdf=None):
    e, _ = error_values(entry, row, g, probe_js, quad_tol, f_cdf)
    return float(e.max())


def map_error_bound(sigma, entry, n_samples=DEFAULT_SAMPLES):
    """Map error implied by ``max E <= sigma``: ``sigma / min g``."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return sigma / extrema(entry.g, n_samples)[0]


def monotonicity_check(row, g, tol=1e-12):
    """Is the discrete map ``j -> grad U_j`` nondecreasing?"""
    s = grad_all(row, g)
    bad = np.nonzero(np.diff(s) < -tol)[0]
    if bad.size:
        return False, int(bad[0] + 1)
    return True, None


def oracle_error(entry, row, g, oracle):
    return float(np.max(np.abs(grad_all(row, g) - oracle(g.interior))))


def lap_range(row, g):
    lap = lap_all(row, g)
    return float(lap.min()), float(lap.max())


def decay_fit(times, values):
    """Least-squares fit of ``log(values)`` against ``times``.

    Returns ``(slope, r_squared)``.
    """
    t = np.asarray(times, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    if t.size < 3:
        raise DomainError("need at least three points for a decay fit")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
