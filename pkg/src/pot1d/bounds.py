"""Derivative-bound constants, admissible grid spacing and a-priori error bounds.

The constants bound the solution ``v`` of the parabolic flow uniformly in
time: ``delta1 <= v_xx <= delta2``, ``|v_xxx| <= psi``, ``|v_xxxx| <= gamma``
and ``|v_tt| <= k_tt``.  ``delta1``/``delta2`` follow from a maximum
principle for ``v_t``; ``psi`` and ``gamma`` come from a chain of estimates on
``w = v_t`` and its derivatives, evaluated here by sampling.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .densities import DEFAULT_SAMPLES, extrema
from .errors import DomainError

INFLATE = 1.05
SAFETY = (0.99, 1.01)

FIELDS = ("delta1", "delta2", "psi", "gamma", "k_tt", "min_g", "max_g", "max_g_d1", "max_vt0")


@dataclass
class DerivativeBounds:
    delta1: float
    delta2: float
    psi: float
    gamma: float
    k_tt: float
    min_g: float
    max_g: float
    max_g_d1: float
    max_vt0: float
    provenance: dict = field(default_factory=dict)
    heuristic: bool = False
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.delta1 <= self.delta2:
            raise DomainError(f"need 0 < delta1 <= delta2, got {self.delta1}, {self.delta2}")
        if self.psi < 0 or self.gamma < 0 or self.k_tt < 0:
            raise DomainError("psi, gamma and k_tt must be nonnegative")
        if not self.min_g > 0:
            raise DomainError("min_g must be positive")

    @property
    def g_ratio(self):
        """``max|g'| / min g``, the factor in front of the gradient term."""
        return self.max_g_d1 / self.min_g

    def to_dict(self):
        return asdict(self)


def _log_ratio_samples(dens, n_samples):
    """Samples of ``dens`` and of the log-derivative ``R = dens'/dens`` with R', R''."""
    x, (v, d1, d2, d3) = dens.sample(n_samples, derivs=(0, 1, 2, 3))
    r = d1 / v
    r1 = d2 / v - r * r
    r2 = d3 / v - 3.0 * d2 * d1 / v**2 + 2.0 * r**3
    return x, r, r1, r2


def vxx_bounds(entry, n_samples=DEFAULT_SAMPLES, safety=(1.0, 1.0)):
    """Lower and upper bounds for ``v_xx`` from the extrema of f, g and u0''.

    ``safety = (lo, hi)`` scales every sampled minimum by ``lo`` and every
    sampled maximum by ``hi``.
    """
    lo, hi = safety
    fmin, fmax, _, _ = extrema(entry.f, n_samples)
    gmin, gmax, _, _ = extrema(entry.g, n_samples)
    x, _ = entry.f.sample(n_samples)
    u2 = entry.u0_d2(x)
    if not u2.min() > 0:
        raise DomainError("u0'' must be positive on [A, B]")
    fmin, gmin, u2min = fmin * lo, gmin * lo, u2.min() * lo
    fmax, gmax, u2max = fmax * hi, gmax * hi, u2.max() * hi
    delta1 = u2min * (fmin / fmax) * (gmin / gmax)
    delta2 = u2max * (fmax / fmin) * (gmax / gmin)
    return float(delta1), float(delta2)


def max_initial_vt(entry, n_samples=DEFAULT_SAMPLES):
    """``max |v_t(0, x)| = max |log(u0'' g(u0') / f)|`` over the sample grid."""
    x, (fv,) = entry.f.sample(n_samples)
    u2 = entry.u0_d2(x)
    if not (u2.min() > 0 and fv.min() > 0):
        raise DomainError("u0'' and f must be positive on the sample grid")
    y = np.clip(entry.u0_d1(x), entry.g.interval_lo, entry.g.interval_hi)
    return float(np.max(np.abs(np.log(u2 * entry.g.eval(y) / fv))))


def vxxx_chain(entry, delta1, delta2, max_vt0, n_samples=DEFAULT_SAMPLES, inflate=INFLATE):
    """Intermediate constants of the ``v_xxx`` estimate.

    ``w_x`` is bounded by ``W = max(C1, C2) exp(max|v_t(0,.)|)`` where ``C1``
    bounds it at an interior maximum and ``C2`` at ``t = 0``.  The relation
    ``v_xxx = phi (w_x + F - G phi)`` with ``phi = v_xx``, ``F = f'/f`` and
    ``G = g'/g`` then gives ``psi``.
    """
    x, F, F1, _ = _log_ratio_samples(entry.f, n_samples)
    _, G, G1, G2 = _log_ratio_samples(entry.g, n_samples)
    fmax_abs, gmax_abs, g1max_abs = np.abs(F).max(), np.abs(G).max(), np.abs(G1).max()

    c1 = 0.0
    for phi in (delta1, delta2):
        a = max(abs(F.min() - G.max() * phi), abs(F.max() - G.min() * phi))
        c1 = max(c1, a + math.sqrt(a * a + 4.0 * g1max_abs * phi * phi))
    c1 *= inflate

    u1 = np.clip(entry.u0_d1(x), entry.g.interval_lo, entry.g.interval_hi)
    u2 = entry.u0_d2(x)
    g_at = entry.g.eval_d1(u1) / entry.g.eval(u1)
    f_ratio = entry.f.eval_d1(x) / entry.f.eval(x)
    c2 = float(np.max(np.abs(entry.u0_d3(x) / u2 - f_ratio + g_at * u2))) * inflate

    w = max(c1, c2) * math.exp(max_vt0)
    psi = delta2 * (w + fmax_abs + gmax_abs * delta2)
    return {
        "C1": c1, "C2": c2, "W": w, "psi": float(psi),
        "max_F": float(fmax_abs), "max_F_d1": float(np.abs(F1).max()),
        "max_G": float(gmax_abs), "max_G_d1": float(g1max_abs),
        "max_G_d2": float(np.abs(G2).max()),
    }


def vxxx_bound(entry, db, n_samples=DEFAULT_SAMPLES, inflate=INFLATE):
    """Bound ``psi >= |v_xxx|``."""
    return vxxx_chain(entry, db.delta1, db.delta2, db.max_vt0, n_samples, inflate)["psi"]


def zx_bound(w, psi, delta1, delta2, max_f, max_f1, max_g, max_g1, max_g2, inflate=INFLATE):
    """Interior bound on ``|z_x|`` where ``z = w_x`` (so ``z_x = w_xx``)."""
    if w == 0.0:
        # |z| <= W = 0 means z vanishes identically
        return 0.0
    lead = 1.0 + w * psi / delta1
    mixed = max_g2 * delta2**2 + max_g1 * psi  # |(G'(v_x) phi)_x|
    bracket = ((w + max_f) * psi / delta1 + max_f1 + 3.0 * delta2 * max_g1
               + delta2 * mixed * w + 0.5 * max_g1 * delta2**2)
    zx = lead + math.sqrt(4.0 * w * w * bracket + lead * lead)
    return max(zx * inflate, math.sqrt(math.e))


def vxxxx_bound(entry, db, phi_x_bound, n_samples=DEFAULT_SAMPLES, inflate=INFLATE,
                fallback=0.0, boundary_zx=0.0):
    """Bound ``gamma >= |v_xxxx|``.

    Returns ``fallback`` when either density has breakpoints, since the second
    derivatives needed by the estimate do not exist across them.
    ``boundary_zx`` is an optional externally obtained bound on ``|z_x|`` at
    the endpoints; the larger of it and the interior value is used.
    """
    if not entry.is_smooth:
        return float(fallback)
    ch = vxxx_chain(entry, db.delta1, db.delta2, db.max_vt0, n_samples, inflate)
    d1, d2, psi = db.delta1, db.delta2, phi_x_bound
    zx = max(zx_bound(ch["W"], psi, d1, d2, ch["max_F"], ch["max_F_d1"], ch["max_G"],
                      ch["max_G_d1"], ch["max_G_d2"], inflate), boundary_zx)
    return float(d2 * (zx + psi**2 / d1**2 + ch["max_F_d1"] + ch["max_G_d1"] * d2**2
                       + ch["max_G"] * psi))


def select_dx(db):
    """Largest spacing allowed by the error conditions (``inf`` when unconstrained)."""
    a = 1.5 * db.delta1 / db.psi if db.psi > 0 else math.inf
    b = math.sqrt(6.0 * db.delta1 / db.gamma) if db.gamma > 0 else math.inf
    return min(a, b)


def _sums(dt_history):
    dts = np.asarray(dt_history, dtype=float)
    if dts.size == 0:
        raise DomainError("dt_history must be nonempty")
    return float(dts.sum()), float(np.dot(dts, dts)), dts.size


def apriori_interior_bound(db, dt_history, dx):
    """Accumulated local errors, every term carrying its own ``dt_i`` factor."""
    if not dx > 0:
        raise DomainError("dx must be positive")
    s1, s2, _ = _sums(dt_history)
    per_time = dx * dx * db.gamma / (6.0 * db.delta1) + db.g_ratio * dx * dx * db.psi / 6.0
    return 0.5 * db.k_tt * s2 + per_time * s1


def apriori_interior_bound_per_step(db, dt_history, dx):
    """Same sum with the gradient term added once per step instead of per unit time."""
    if not dx > 0:
        raise DomainError("dx must be positive")
    s1, s2, n = _sums(dt_history)
    return (0.5 * db.k_tt * s2 + dx * dx * db.gamma / (6.0 * db.delta1) * s1
            + n * db.g_ratio * dx * dx * db.psi / 6.0)


def apriori_boundary_bound(db, dt_history, dx, factor=2.0):
    """Endpoint error bound; the middle term is first order in ``dx``.

    ``factor / 3`` multiplies ``dx psi / delta1``.  The default 2 follows from
    bounding the mean-value point of ``log`` below by ``delta1 / 2``; the
    report also carries the sharper-looking ``factor = 1`` variant.
    """
    if not dx > 0:
        raise DomainError("dx must be positive")
    s1, s2, _ = _sums(dt_history)
    per_time = factor * dx * db.psi / (3.0 * db.delta1) + db.g_ratio * dx * dx * db.psi / 6.0
    return 0.5 * db.k_tt * s2 + per_time * s1


def derive_bounds(entry, n_samples=DEFAULT_SAMPLES, safety=SAFETY, inflate=INFLATE,
                  overrides=None, gamma_fallback=0.0, t_scale=1.0):
    """Compute every constant for ``entry``; ``overrides`` replaces any of them.

    Overridden values feed the later stages of the chain.
    """
    overrides = {k: float(v) for k, v in (overrides or {}).items() if v is not None}
    unknown = set(overrides) - set(FIELDS)
    if unknown:
        raise DomainError(f"unknown bound overrides: {sorted(unknown)}")
    prov = {}

    def pick(name, computed, tag="computed"):
        if name in overrides:
            prov[name] = "user_supplied"
            return overrides[name]
        prov[name] = tag
        return computed

    gmin, gmax, _, g1max = extrema(entry.g, n_samples)
    min_g = pick("min_g", gmin)
    max_g = pick("max_g", gmax)
    max_g_d1 = pick("max_g_d1", g1max)
    d1, d2 = vxx_bounds(entry, n_samples, safety)
    delta1 = pick("delta1", d1)
    delta2 = pick("delta2", d2)
    max_vt0 = pick("max_vt0", max_initial_vt(entry, n_samples))
    chain = vxxx_chain(entry, delta1, delta2, max_vt0, n_samples, inflate)
    psi = pick("psi", chain["psi"])
    k_tt = pick("k_tt", 2.0 * max_vt0 / t_scale, tag="heuristic")

    partial = DerivativeBounds(delta1, delta2, psi, 0.0, k_tt, min_g, max_g, max_g_d1, max_vt0)
    if entry.is_smooth:
        gamma = pick("gamma", vxxxx_bound(entry, partial, psi, n_samples, inflate))
    else:
        gamma = overrides.get("gamma", gamma_fallback)
        prov["gamma"] = "user_supplied"

    return DerivativeBounds(
        delta1=delta1, delta2=delta2, psi=psi, gamma=gamma, k_tt=k_tt,
        min_g=min_g, max_g=max_g, max_g_d1=max_g_d1, max_vt0=max_vt0,
        provenance=prov, heuristic=not entry.is_smooth,
        details={
            "chain": chain, "n_samples": n_samples, "safety": list(safety),
            "inflate": inflate, "t_scale": t_scale,
            "breakpoints": {"f": list(entry.f.breakpoints), "g": list(entry.g.breakpoints)},
        },
    )
