"""Hot numerical kernels.

Densities are stored as piecewise closed-form expressions so that they can be
evaluated inside compiled loops: ``kinds[i]`` selects the expression on piece
``i`` and ``params[i]`` holds its four coefficients.  Piece ``i`` covers
``(edges[i], edges[i+1]]`` (left-continuous at interior breakpoints); the
first piece also owns ``edges[0]``.

Every kernel here exists twice: a loop form that is compiled with numba and a
pure-numpy form.  :data:`pot1d._accel.USE_NUMBA` decides which one the public
wrappers dispatch to.
"""
import math

import numpy as np

from . import _accel

POLY = 0  # c0 + c1 x + c2 x^2 + c3 x^3
LOG = 1  # p0 log(x + p1) + p2
COS = 2  # p0 (cos(p1 x) + p2)
EXPCOS = 3  # p0 exp(p1 cos x)

KIND_NAMES = {POLY: "poly", LOG: "log", COS: "cos", EXPCOS: "expcos"}

# status codes returned by the advance kernels
OK = 0
CONVEXITY_LOSS = 1
TARGET_NONPOSITIVE = 2
NONFINITE = 3
DEGENERATE_DT = 4

_MAX_DEPTH = 48
_STACK = 128
_INITIAL_PANELS = 16


# ---------------------------------------------------------------------------
# scalar loop forms (compiled when numba is available)


def _piece_value(kind, p, x, deriv):
    if kind == POLY:
        if deriv == 0:
            return p[0] + x * (p[1] + x * (p[2] + x * p[3]))
        if deriv == 1:
            return p[1] + x * (2.0 * p[2] + 3.0 * x * p[3])
        if deriv == 2:
            return 2.0 * p[2] + 6.0 * x * p[3]
        return 6.0 * p[3]
    if kind == LOG:
        s = x + p[1]
        if deriv == 0:
            return p[0] * math.log(s) + p[2]
        if deriv == 1:
            return p[0] / s
        if deriv == 2:
            return -p[0] / (s * s)
        return 2.0 * p[0] / (s * s * s)
    if kind == COS:
        w = p[1]
        if deriv == 0:
            return p[0] * (math.cos(w * x) + p[2])
        if deriv == 1:
            return -p[0] * w * math.sin(w * x)
        if deriv == 2:
            return -p[0] * w * w * math.cos(w * x)
        return p[0] * w * w * w * math.sin(w * x)
    # EXPCOS
    k = p[1]
    val = p[0] * math.exp(k * math.cos(x))
    if deriv == 0:
        return val
    h1 = -k * math.sin(x)
    if deriv == 1:
        return val * h1
    h2 = -k * math.cos(x)
    if deriv == 2:
        return val * (h1 * h1 + h2)
    h3 = k * math.sin(x)
    return val * (h1 * h1 * h1 + 3.0 * h1 * h2 + h3)


_piece_value_c = _accel.njit(_piece_value)


def _make_pw_eval(piece_value):
    def pw_eval(kinds, params, breaks, x, deriv):
        i = 0
        nb = breaks.shape[0]
        while i < nb and breaks[i] < x:
            i += 1
        return piece_value(kinds[i], params[i], x, deriv)

    return pw_eval


_pw_eval_py = _make_pw_eval(_piece_value)
_pw_eval_c = _accel.njit(_make_pw_eval(_piece_value_c))


def _make_simpson(piece_value, wrap=lambda f: f):
    def simpson_piece(kind, p, a, b, tol):
        """Adaptive Simpson with Richardson correction on one smooth piece."""
        if not b > a:
            return 0.0
        sa = np.empty(_STACK)
        sb = np.empty(_STACK)
        sfa = np.empty(_STACK)
        sfm = np.empty(_STACK)
        sfb = np.empty(_STACK)
        sw = np.empty(_STACK)
        st = np.empty(_STACK)
        sd = np.empty(_STACK, dtype=np.int64)
        total = 0.0
        h = (b - a) / _INITIAL_PANELS
        panel_tol = tol / _INITIAL_PANELS
        for k in range(_INITIAL_PANELS):
            lo = a + k * h
            hi = b if k == _INITIAL_PANELS - 1 else a + (k + 1) * h
            fa = piece_value(kind, p, lo, 0)
            fb = piece_value(kind, p, hi, 0)
            fm = piece_value(kind, p, 0.5 * (lo + hi), 0)
            sp = 0
            sa[0] = lo
            sb[0] = hi
            sfa[0] = fa
            sfm[0] = fm
            sfb[0] = fb
            sw[0] = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)
            st[0] = panel_tol
            sd[0] = 0
            sp = 1
            while sp > 0:
                sp -= 1
                x0 = sa[sp]
                x1 = sb[sp]
                f0 = sfa[sp]
                fmid = sfm[sp]
                f1 = sfb[sp]
                whole = sw[sp]
                t = st[sp]
                depth = sd[sp]
                m = 0.5 * (x0 + x1)
                flm = piece_value(kind, p, 0.5 * (x0 + m), 0)
                frm = piece_value(kind, p, 0.5 * (m + x1), 0)
                left = (m - x0) / 6.0 * (f0 + 4.0 * flm + fmid)
                right = (x1 - m) / 6.0 * (fmid + 4.0 * frm + f1)
                delta = left + right - whole
                if depth >= _MAX_DEPTH or abs(delta) <= 15.0 * t or sp + 2 > _STACK:
                    total += left + right + delta / 15.0
                else:
                    sa[sp] = m
                    sb[sp] = x1
                    sfa[sp] = fmid
                    sfm[sp] = frm
                    sfb[sp] = f1
                    sw[sp] = right
                    st[sp] = 0.5 * t
                    sd[sp] = depth + 1
                    sp += 1
                    sa[sp] = x0
                    sb[sp] = m
                    sfa[sp] = f0
                    sfm[sp] = flm
                    sfb[sp] = fmid
                    sw[sp] = left
                    st[sp] = 0.5 * t
                    sd[sp] = depth + 1
                    sp += 1
        return total

    simpson_piece = wrap(simpson_piece)

    def pw_integrate(kinds, params, edges, a, b, tol):
        """Integral over [a, b] split at the interior edges."""
        if not b > a:
            return 0.0
        span = b - a
        total = 0.0
        for i in range(kinds.shape[0]):
            lo = max(a, edges[i])
            hi = min(b, edges[i + 1])
            if hi > lo:
                total += simpson_piece(kinds[i], params[i], lo, hi, tol * (hi - lo) / span)
        return total

    return simpson_piece, wrap(pw_integrate)


_simpson_piece_py, _pw_integrate_py = _make_simpson(_piece_value)
_simpson_piece_c, _pw_integrate_c = _make_simpson(_piece_value_c, _accel.njit)


def _make_advance(pw_eval):
    def advance(u, logf, dx, c, d, kinds, params, breaks, n_steps, r_safety,
                half_delta1, max_dt, t, t_end, dts):
        """March the explicit scheme for at most ``n_steps`` steps in place.

        Returns ``(n_done, t, status, bad_j, min_lap, min_lap_seen, mono_ok)``
        where ``min_lap`` belongs to the state left in ``u``.
        """
        m = u.shape[0]
        jmax = m - 3
        dx2 = dx * dx
        two_dx = 2.0 * dx
        new = np.empty(m)
        lap = np.empty(jmax + 1)
        status = 0
        bad = -1
        n_done = 0
        min_lap_seen = np.inf
        mono_ok = True
        min_lap = np.inf
        for step in range(n_steps + 1):
            min_lap = np.inf
            arg = -1
            prev = -np.inf
            for j in range(jmax + 1):
                k = j + 1
                lap[j] = (u[k + 1] + u[k - 1] - 2.0 * u[k]) / dx2
                if lap[j] < min_lap:
                    min_lap = lap[j]
                    arg = j
                grad = (u[k + 1] - u[k - 1]) / two_dx
                if grad < prev - 1e-12:
                    mono_ok = False
                prev = grad
            if not min_lap > 0.0:
                status = 1
                bad = arg
                break
            if min_lap < min_lap_seen:
                min_lap_seen = min_lap
            if step == n_steps or t >= t_end:
                break
            dt = r_safety * dx2 * min(half_delta1, min_lap)
            if dt > max_dt:
                dt = max_dt
            hit_end = t + dt >= t_end
            if hit_end:
                dt = t_end - t
            if not dt >= 1e-300:
                status = 4
                break
            for j in range(jmax + 1):
                k = j + 1
                grad = (u[k + 1] - u[k - 1]) / two_dx
                gv = pw_eval(kinds, params, breaks, grad, 0)
                if not gv > 0.0:
                    status = 2
                    bad = j
                    break
                new[k] = u[k] + dt * (math.log(lap[j]) - logf[j] + math.log(gv))
            if status != 0:
                break
            new[0] = new[2] - 2.0 * c * dx
            new[m - 1] = new[m - 3] + 2.0 * d * dx
            finite = True
            for k in range(m):
                if not math.isfinite(new[k]):
                    finite = False
                    bad = k - 1
                    break
            if not finite:
                status = 3
                break
            for k in range(m):
                u[k] = new[k]
            t = t_end if hit_end else t + dt
            dts[n_done] = dt
            n_done += 1
        return n_done, t, status, bad, min_lap, min_lap_seen, mono_ok

    return advance


_advance_loop = _make_advance(_pw_eval_py)
_advance_c = _accel.njit(_make_advance(_pw_eval_c))


# ---------------------------------------------------------------------------
# numpy forms


def pw_eval_numpy(kinds, params, breaks, x, deriv=0):
    x = np.asarray(x, dtype=float)
    idx = np.searchsorted(breaks, x, side="left")
    out = np.empty_like(x)
    for i in range(len(kinds)):
        mask = idx == i
        if not mask.any():
            continue
        xi = x[mask]
        p = params[i]
        kind = kinds[i]
        if kind == POLY:
            if deriv == 0:
                v = p[0] + xi * (p[1] + xi * (p[2] + xi * p[3]))
            elif deriv == 1:
                v = p[1] + xi * (2.0 * p[2] + 3.0 * xi * p[3])
            elif deriv == 2:
                v = 2.0 * p[2] + 6.0 * xi * p[3]
            else:
                v = np.full_like(xi, 6.0 * p[3])
        elif kind == LOG:
            s = xi + p[1]
            v = (p[0] * np.log(s) + p[2], p[0] / s, -p[0] / s**2, 2.0 * p[0] / s**3)[deriv]
        elif kind == COS:
            w = p[1]
            if deriv == 0:
                v = p[0] * (np.cos(w * xi) + p[2])
            elif deriv == 1:
                v = -p[0] * w * np.sin(w * xi)
            elif deriv == 2:
                v = -p[0] * w * w * np.cos(w * xi)
            else:
                v = p[0] * w**3 * np.sin(w * xi)
        else:
            k = p[1]
            val = p[0] * np.exp(k * np.cos(xi))
            h1 = -k * np.sin(xi)
            h2 = -k * np.cos(xi)
            v = (val, val * h1, val * (h1 * h1 + h2),
                 val * (h1**3 + 3.0 * h1 * h2 + k * np.sin(xi)))[deriv]
        out[mask] = v
    return out


def piece_antiderivative(kind, p, x):
    """Closed-form antiderivative of one piece, or ``None`` if unavailable."""
    x = np.asarray(x, dtype=float)
    if kind == POLY:
        return x * (p[0] + x * (p[1] / 2.0 + x * (p[2] / 3.0 + x * p[3] / 4.0)))
    if kind == LOG:
        s = x + p[1]
        return p[0] * (s * np.log(s) - s) + p[2] * x
    if kind == COS:
        return p[0] * (np.sin(p[1] * x) / p[1] + p[2] * x)
    return None


def _advance_numpy(u, logf, dx, c, d, kinds, params, breaks, n_steps, r_safety,
                   half_delta1, max_dt, t, t_end, dts):
    m = u.shape[0]
    dx2 = dx * dx
    two_dx = 2.0 * dx
    status = 0
    bad = -1
    n_done = 0
    min_lap_seen = np.inf
    mono_ok = True
    min_lap = np.inf
    for step in range(n_steps + 1):
        lap = (u[2:] + u[:-2] - 2.0 * u[1:-1]) / dx2
        grad = (u[2:] - u[:-2]) / two_dx
        arg = int(np.argmin(lap))
        min_lap = float(lap[arg])
        if np.any(np.diff(grad) < -1e-12):
            mono_ok = False
        if not min_lap > 0.0:
            status, bad = 1, arg
            break
        min_lap_seen = min(min_lap_seen, min_lap)
        if step == n_steps or t >= t_end:
            break
        dt = min(r_safety * dx2 * min(half_delta1, min_lap), max_dt)
        hit_end = t + dt >= t_end
        if hit_end:
            dt = t_end - t
        if not dt >= 1e-300:
            status = 4
            break
        gv = pw_eval_numpy(kinds, params, breaks, grad, 0)
        if not np.all(gv > 0.0):
            status, bad = 2, int(np.argmin(gv > 0.0))
            break
        new = np.empty(m)
        new[1:-1] = u[1:-1] + dt * (np.log(lap) - logf + np.log(gv))
        new[0] = new[2] - 2.0 * c * dx
        new[-1] = new[-3] + 2.0 * d * dx
        finite = np.isfinite(new)
        if not finite.all():
            status, bad = 3, int(np.argmin(finite)) - 1
            break
        u[:] = new
        t = t_end if hit_end else t + dt
        dts[n_done] = dt
        n_done += 1
    return n_done, t, status, bad, min_lap, min_lap_seen, mono_ok


# ---------------------------------------------------------------------------
# dispatch


def advance(*args, backend=None):
    """Run the stepping kernel on the selected backend (see module doc)."""
    backend = backend or _accel.backend_name()
    if backend == "numba":
        return _advance_c(*args)
    return _advance_numpy(*args)


def integrate(kinds, params, edges, a, b, tol, backend=None):
    backend = backend or _accel.backend_name()
    if backend == "numba":
        return _pw_integrate_c(kinds, params, edges, float(a), float(b), float(tol))
    return _pw_integrate_py(kinds, params, edges, float(a), float(b), float(tol))


def pw_eval(kinds, params, breaks, x, deriv=0):
    return pw_eval_numpy(kinds, params, breaks, x, deriv)
