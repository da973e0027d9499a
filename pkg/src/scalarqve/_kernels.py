"""Compiled inner loops: field evaluation, per-mode right-hand sides and an
embedded explicit Runge-Kutta driver.

Everything here works on plain float arrays so it can be compiled with
numba in nopython mode and released from the GIL. The public, typed
surface lives in :mod:`scalarqve.field`, :mod:`scalarqve.qve` and
:mod:`scalarqve.integrator`.

Pulse parameter rows are ``(E1, delta, omega, tau, delay, phase)`` where
``E1`` is the effective amplitude ``E01 / sqrt(1 + delta**2)``.

State layouts (vector potential carried as the trailing components)::

    CHI          chi0, chi1, chi2, Ax, Ay
    FGH          F, G, H, Ax, Ay
    BOGOLIUBOV   Re a, Im a, Re b, Im b, Theta, Ax, Ay
"""
import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop853

CHI = 0
FGH = 1
BOGOLIUBOV = 2

STATE_SIZE = (5, 5, 7)

# status codes returned by integrate()
OK = 0
STEP_BUDGET = 1
STEP_UNDERFLOW = 2

# Dormand-Prince 5(4)
DP5_C = np.array([0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0])
DP5_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
])
DP5_B = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                  -2187.0 / 6784.0, 11.0 / 84.0])
DP5_E = np.array([-71.0 / 57600.0, 0.0, 71.0 / 16695.0, -71.0 / 1920.0,
                  17253.0 / 339200.0, -22.0 / 525.0, 1.0 / 40.0])

# Dormand-Prince 8(5,3), coefficients shared with scipy's DOP853
_NS = _dop853.N_STAGES
DOP853_C = np.ascontiguousarray(_dop853.C[:_NS])
DOP853_A = np.ascontiguousarray(_dop853.A[:_NS, :_NS])
DOP853_B = np.ascontiguousarray(_dop853.B)
DOP853_E3 = np.ascontiguousarray(_dop853.E3)
DOP853_E5 = np.ascontiguousarray(_dop853.E5)

METHOD_DP5 = 0
METHOD_DOP853 = 1


@njit(cache=True, nogil=True)
def field_at(pulses, t):
    ex = 0.0
    ey = 0.0
    for i in range(pulses.shape[0]):
        e1 = pulses[i, 0]
        if e1 == 0.0:
            continue
        s = t - pulses[i, 4]
        tau = pulses[i, 3]
        env = e1 * math.exp(-s * s / (2.0 * tau * tau))
        ph = pulses[i, 2] * s + pulses[i, 5]
        ex += env * math.cos(ph)
        ey += env * pulses[i, 1] * math.sin(ph)
    return ex, ey


@njit(cache=True, nogil=True)
def rhs(form, t, y, out, pulses, kx, ky, kz, q, m):
    """Write dy/dt into ``out`` and return omega(k, t)."""
    n = y.shape[0]
    ax = y[n - 2]
    ay = y[n - 1]
    ex, ey = field_at(pulses, t)
    px = kx - q * ax
    py = ky - q * ay
    p2 = px * px + py * py + kz * kz
    w2 = p2 + m * m
    w = math.sqrt(w2)
    if form == CHI:
        a = p2 / m
        b = a + 2.0 * m
        out[0] = a * y[2]
        out[1] = -b * y[2]
        # a chi0_vac + b chi1_vac = 0 at every instant; subtract it so the
        # vacuum is an exact fixed point in the absence of a field
        out[2] = (a * (y[0] - 0.5 * (m / w + w / m))
                  + b * (y[1] - 0.5 * (m / w - w / m)))
    elif form == FGH:
        W = q * (ex * px + ey * py) / w2
        out[0] = 0.5 * W * y[1]
        out[1] = W * (1.0 + 2.0 * y[0]) - 2.0 * w * y[2]
        out[2] = 2.0 * w * y[1]
    else:
        W = q * (ex * px + ey * py) / w2
        c = math.cos(2.0 * y[4])
        s = math.sin(2.0 * y[4])
        hw = 0.5 * W
        # d alpha = W/2 beta e^{+2i Theta}
        out[0] = hw * (y[2] * c - y[3] * s)
        out[1] = hw * (y[2] * s + y[3] * c)
        # d beta = W/2 alpha e^{-2i Theta}
        out[2] = hw * (y[0] * c + y[1] * s)
        out[3] = hw * (y[1] * c - y[0] * s)
        out[4] = w
    out[n - 2] = -ex
    out[n - 1] = -ey
    return w


@njit(cache=True, nogil=True)
def distribution(form, y, kx, ky, kz, q, m):
    """F carried by the state (after mapping CHI/BOGOLIUBOV onto F)."""
    if form == FGH:
        return y[0]
    if form == BOGOLIUBOV:
        return y[2] * y[2] + y[3] * y[3]
    n = y.shape[0]
    px = kx - q * y[n - 2]
    py = ky - q * y[n - 1]
    p2 = px * px + py * py + kz * kz
    w = math.sqrt(p2 + m * m)
    b = p2 / (2.0 * m * w)
    # a chi0_vac + b chi1_vac = 1; subtracting the vacuum first avoids cancellation
    d0 = y[0] - 0.5 * (m / w + w / m)
    d1 = y[1] - 0.5 * (m / w - w / m)
    return 0.5 * ((b + m / w) * d0 + b * d1)


@njit(cache=True, nogil=True)
def constraint(form, y):
    """Deviation of the formulation's conserved quadratic form from 1."""
    if form == CHI:
        return y[0] * y[0] - y[1] * y[1] - y[2] * y[2] - 1.0
    if form == FGH:
        u = 1.0 + 2.0 * y[0]
        return u * u - y[1] * y[1] - y[2] * y[2] - 1.0
    return (y[0] * y[0] + y[1] * y[1]) - (y[2] * y[2] + y[3] * y[3]) - 1.0


@njit(cache=True, nogil=True)
def vacuum_state(form, kx, ky, kz, q, m, ax, ay):
    y = np.zeros(STATE_SIZE[form])
    n = y.shape[0]
    y[n - 2] = ax
    y[n - 1] = ay
    if form == CHI:
        px = kx - q * ax
        py = ky - q * ay
        w = math.sqrt(px * px + py * py + kz * kz + m * m)
        y[0] = 0.5 * (m / w + w / m)
        y[1] = 0.5 * (m / w - w / m)
    elif form == BOGOLIUBOV:
        y[0] = 1.0
    return y


@njit(cache=True, nogil=True)
def _error_norm(method, K, h, y, y_new, rtol, atol, E, E3, E5):
    n = y.shape[0]
    ns = K.shape[0]
    if method == METHOD_DP5:
        acc = 0.0
        for j in range(n):
            sc = atol + rtol * max(abs(y[j]), abs(y_new[j]))
            e = 0.0
            for s in range(ns):
                e += K[s, j] * E[s]
            e = e * h / sc
            acc += e * e
        return math.sqrt(acc / n)
    n5 = 0.0
    n3 = 0.0
    for j in range(n):
        sc = atol + rtol * max(abs(y[j]), abs(y_new[j]))
        e5 = 0.0
        e3 = 0.0
        for s in range(ns):
            e5 += K[s, j] * E5[s]
            e3 += K[s, j] * E3[s]
        e5 /= sc
        e3 /= sc
        n5 += e5 * e5
        n3 += e3 * e3
    if n5 == 0.0 and n3 == 0.0:
        return 0.0
    return abs(h) * n5 / math.sqrt((n5 + 0.01 * n3) * n)


@njit(cache=True, nogil=True)
def integrate(form, method, y0, t0, t1, pulses, kx, ky, kz, q, m,
              rtol, atol, max_steps, t_tail, rec_cap):
    """Adaptive integration of one mode from ``t0`` to ``t1``.

    Returns ``(y, status, t_fail, n_steps, n_rejected, drift, f_min,
    f_tail, h_ratio_max, rec_t, rec_y, n_rec)``. ``h_ratio_max`` is the
    largest accepted ``|h| * omega_max / (pi / 4)``; it never exceeds 1.
    """
    if method == METHOD_DP5:
        C = DP5_C
        A = DP5_A
        B = DP5_B
        order = 5.0
    else:
        C = DOP853_C
        A = DOP853_A
        B = DOP853_B
        order = 8.0
    E = DP5_E
    E3 = DOP853_E3
    E5 = DOP853_E5
    ns = C.shape[0]
    n = y0.shape[0]
    K = np.zeros((ns + 1, n))
    y = y0.copy()
    y_new = np.empty(n)
    ytmp = np.empty(n)
    f = np.empty(n)
    rec_t = np.empty(rec_cap)
    rec_y = np.empty((rec_cap, n))
    n_rec = 0
    if rec_cap > 0:
        rec_t[0] = t0
        rec_y[0, :] = y
        n_rec = 1

    direction = 1.0 if t1 >= t0 else -1.0
    w = rhs(form, t0, y, f, pulses, kx, ky, kz, q, m)
    quarter = math.pi / 4.0
    h_abs = 0.5 * quarter / w
    t = t0
    n_steps = 0
    n_rej = 0
    # drift is the change of the conserved form from its (rounded) initial value
    c_init = constraint(form, y)
    drift = 0.0
    f_min = distribution(form, y, kx, ky, kz, q, m)
    f_tail = np.nan
    if direction * (t - t_tail) >= 0.0:
        f_tail = f_min
    h_ratio_max = 0.0
    exponent = -1.0 / order
    status = OK
    t_fail = np.nan

    while direction * (t1 - t) > 0.0:
        if n_steps >= max_steps:
            status = STEP_BUDGET
            t_fail = t
            break
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        rejected = False
        accepted = False
        while not accepted:
            if h_abs < min_step:
                status = STEP_UNDERFLOW
                t_fail = t
                break
            h = h_abs * direction
            t_new = t + h
            if direction * (t_new - t1) > 0.0:
                t_new = t1
            h = t_new - t
            h_abs = abs(h)

            for j in range(n):
                K[0, j] = f[j]
            w_max = w
            for s in range(1, ns):
                for j in range(n):
                    acc = 0.0
                    for r in range(s):
                        acc += A[s, r] * K[r, j]
                    ytmp[j] = y[j] + h * acc
                ws = rhs(form, t + C[s] * h, ytmp, K[s], pulses, kx, ky, kz, q, m)
                if ws > w_max:
                    w_max = ws
            for j in range(n):
                acc = 0.0
                for s in range(ns):
                    acc += B[s] * K[s, j]
                y_new[j] = y[j] + h * acc
            ws = rhs(form, t + h, y_new, K[ns], pulses, kx, ky, kz, q, m)
            if ws > w_max:
                w_max = ws

            # phase-skipping guard
            cap = quarter / w_max
            if h_abs > cap * (1.0 + 1e-12):
                h_abs = 0.9 * cap
                continue

            err = _error_norm(method, K, h, y, y_new, rtol, atol, E, E3, E5)
            if err < 1.0:
                if err == 0.0:
                    factor = 10.0
                else:
                    factor = min(10.0, 0.9 * err ** exponent)
                if rejected:
                    factor = min(1.0, factor)
                ratio = h_abs / quarter * w_max
                if ratio > h_ratio_max:
                    h_ratio_max = ratio
                h_abs *= factor
                accepted = True
            else:
                h_abs *= max(0.2, 0.9 * err ** exponent)
                rejected = True
                n_rej += 1
        if status != OK:
            break

        t = t_new
        for j in range(n):
            y[j] = y_new[j]
            f[j] = K[ns, j]
        w = ws
        n_steps += 1
        c = abs(constraint(form, y) - c_init)
        if c > drift:
            drift = c
        fv = distribution(form, y, kx, ky, kz, q, m)
        if fv < f_min:
            f_min = fv
        if math.isnan(f_tail) and direction * (t - t_tail) >= 0.0:
            f_tail = fv
        if n_rec < rec_cap:
            rec_t[n_rec] = t
            rec_y[n_rec, :] = y
            n_rec += 1

    return (y, status, t_fail, n_steps, n_rej, drift, f_min, f_tail,
            h_ratio_max, rec_t, rec_y, n_rec)


@njit(cache=True, nogil=True)
def solve_block(form, method, ks, pulses, q, m, t0, t1, rtol, atol,
                max_steps, t_tail, out):
    """Solve every momentum row of ``ks`` from vacuum; results go to ``out``.

    ``out`` columns: F_inf, status, t_fail, n_steps, drift, f_min, f_tail.
    """
    for i in range(ks.shape[0]):
        kx = ks[i, 0]
        ky = ks[i, 1]
        kz = ks[i, 2]
        y0 = vacuum_state(form, kx, ky, kz, q, m, 0.0, 0.0)
        res = integrate(form, method, y0, t0, t1, pulses, kx, ky, kz, q, m,
                        rtol, atol, max_steps, t_tail, 0)
        y = res[0]
        out[i, 0] = distribution(form, y, kx, ky, kz, q, m)
        out[i, 1] = res[1]
        out[i, 2] = res[2]
        out[i, 3] = res[3]
        out[i, 4] = res[5]
        out[i, 5] = res[6]
        out[i, 6] = res[7]
