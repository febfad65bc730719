"""Compiled Dormand-Prince 5(4) integration, Benettin rescaling and section crossings.

One right-hand side serves two systems, selected by ``kind``:

* ``BOHM``: guidance velocity of a packed wave function (``aux`` = 1/mass per particle)
* ``HENON_HEILES``: the classical Henon-Heiles flow on (x, y, p_x, p_y)
  (``aux[0]`` = escape radius)

Adding ``PAIR`` to either kind integrates two copies of the system stacked in
one vector, so a reference trajectory and its Benettin partner share every
step size.

The right-hand side returns a health value: |psi|^2 for the Bohmian flow, 1 for
Henon-Heiles, and a negative number when the point lies outside the allowed
domain.  Steps with any unhealthy stage are rejected and halved, so positions
are never clamped.
"""

import math

import numpy as np
from numba import njit

from ._field import bohm_velocity, workspace

BOHM = 0
HENON_HEILES = 1
PAIR = 2

OK = 0
NODE = 1
DOMAIN = 2
STEP_FAILURE = 3
BUDGET = 4

H_MIN = 1e-12

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40


@njit(cache=True, error_model='numpy', inline='always')
def rhs(kind, data, ws, aux, t, y, out):
    if kind >= PAIR:
        m = y.shape[0] // 2
        a = rhs_one(kind - PAIR, data, ws, aux, t, y[:m], out[:m])
        b = rhs_one(kind - PAIR, data, ws, aux, t, y[m:], out[m:])
        return min(a, b)
    return rhs_one(kind, data, ws, aux, t, y, out)


@njit(cache=True, error_model='numpy', inline='always')
def rhs_one(kind, data, ws, aux, t, y, out):
    if kind == BOHM:
        return bohm_velocity(data, ws, aux, t, y, out)
    x, yy, px, py = y[0], y[1], y[2], y[3]
    out[0] = px
    out[1] = py
    out[2] = -x - 2.0 * x * yy
    out[3] = -yy - x * x + yy * yy
    if x * x + yy * yy > aux[0] * aux[0]:
        return -1.0
    return 1.0


@njit(cache=True, error_model='numpy')
def dp_step(kind, data, ws, aux, t, y, h, k1, ks, ynew, yerr, tmp):
    """One trial step from (y, k1).  ks[5] holds f(ynew) on return (FSAL).

    Returns the smallest stage health (negative if any stage left the domain).
    """
    n = y.shape[0]
    worst = math.inf
    for i in range(n):
        tmp[i] = y[i] + h * A21 * k1[i]
    worst = min(worst, rhs(kind, data, ws, aux, t + C2 * h, tmp, ks[0]))
    if worst < 0:
        return worst
    for i in range(n):
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * ks[0, i])
    worst = min(worst, rhs(kind, data, ws, aux, t + C3 * h, tmp, ks[1]))
    if worst < 0:
        return worst
    for i in range(n):
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * ks[0, i] + A43 * ks[1, i])
    worst = min(worst, rhs(kind, data, ws, aux, t + C4 * h, tmp, ks[2]))
    if worst < 0:
        return worst
    for i in range(n):
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * ks[0, i] + A53 * ks[1, i] + A54 * ks[2, i])
    worst = min(worst, rhs(kind, data, ws, aux, t + C5 * h, tmp, ks[3]))
    if worst < 0:
        return worst
    for i in range(n):
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * ks[0, i] + A63 * ks[1, i] + A64 * ks[2, i]
                             + A65 * ks[3, i])
    worst = min(worst, rhs(kind, data, ws, aux, t + h, tmp, ks[4]))
    if worst < 0:
        return worst
    for i in range(n):
        ynew[i] = y[i] + h * (A71 * k1[i] + A73 * ks[1, i] + A74 * ks[2, i] + A75 * ks[3, i]
                              + A76 * ks[4, i])
    worst = min(worst, rhs(kind, data, ws, aux, t + h, ynew, ks[5]))
    for i in range(n):
        yerr[i] = h * (E1 * k1[i] + E3 * ks[1, i] + E4 * ks[2, i] + E5 * ks[3, i]
                       + E6 * ks[4, i] + E7 * ks[5, i])
    return worst


@njit(cache=True, error_model='numpy')
def error_norm(y, ynew, yerr, rtol, atol):
    acc = 0.0
    n = y.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        acc += (yerr[i] / sc) ** 2
    return math.sqrt(acc / n)


@njit(cache=True, error_model='numpy')
def initial_step(y, k1, rtol, atol, hmax):
    d0 = 0.0
    d1 = 0.0
    for i in range(y.shape[0]):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (k1[i] / sc) ** 2
    d0 = math.sqrt(d0 / y.shape[0])
    d1 = math.sqrt(d1 / y.shape[0])
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    return min(h, hmax)


@njit(cache=True, error_model='numpy')
def advance(kind, data, aux, state, y, k1, t_end, rtol, atol, hmax, floor_rel,
            sec_idx, sec_level, sec_t, sec_y, sec_dir, nsec, max_evals=0.0):
    """Integrate ``y`` in place up to ``t_end``.

    ``state`` = [t, h, amax, facold, nfev] is updated in place.  ``k1`` must
    hold f(y) on entry and holds it again on return.  With ``sec_idx >= 0``
    every crossing of y[sec_idx] = sec_level is refined and appended to the
    sec_* buffers; the returned count saturates at their capacity.
    A positive ``max_evals`` caps state[4]; reaching it returns BUDGET.

    Returns (status, nsec).
    """
    n = y.shape[0]
    ks = np.empty((6, n))
    ynew = np.empty(n)
    yerr = np.empty(n)
    ytry = np.empty(n)
    etry = np.empty(n)
    kstry = np.empty((6, n))
    tmp = np.empty(n)
    ws = workspace(data)
    t = state[0]
    h = state[1]
    amax = state[2]
    facold = state[3]
    beta = 0.04
    expo1 = 0.2 - 0.75 * beta
    safe = 0.9
    if h <= 0.0:
        h = initial_step(y, k1, rtol, atol, hmax)
    while t < t_end:
        last = False
        hs = min(h, hmax)
        if t + hs >= t_end:
            hs = t_end - t
            last = True
        if hs < H_MIN and not last:
            state[0] = t
            state[1] = h
            return STEP_FAILURE, nsec
        if max_evals > 0.0 and state[4] >= max_evals:
            state[0] = t
            state[1] = h
            return BUDGET, nsec
        worst = dp_step(kind, data, ws, aux, t, y, hs, k1, ks, ynew, yerr, tmp)
        state[4] += 6.0
        if worst < 0.0:
            h = 0.5 * hs
            if h < H_MIN:
                state[0] = t
                state[1] = h
                return DOMAIN, nsec
            continue
        err = error_norm(y, ynew, yerr, rtol, atol)
        if err > 1.0 or not math.isfinite(err):
            if not math.isfinite(err):
                h = 0.2 * hs
            else:
                h = hs / min(5.0, err ** expo1 / safe)
            if h < H_MIN:
                state[0] = t
                state[1] = h
                return STEP_FAILURE, nsec
            continue
        # accepted
        if sec_idx >= 0:
            f0 = y[sec_idx] - sec_level
            f1 = ynew[sec_idx] - sec_level
            if (f0 < 0.0 and f1 >= 0.0) or (f0 > 0.0 and f1 <= 0.0):
                if nsec < sec_t.shape[0]:
                    if f1 == 0.0:
                        tau = hs
                        for i in range(n):
                            ytry[i] = ynew[i]
                    else:
                        lo = 0.0
                        hi = hs
                        flo = f0
                        tau = hs
                        for _ in range(200):
                            tau = 0.5 * (lo + hi)
                            dp_step(kind, data, ws, aux, t, y, tau, k1, kstry, ytry, etry, tmp)
                            fm = ytry[sec_idx] - sec_level
                            if abs(fm) <= 1e-12 or hi - lo < 1e-16:
                                break
                            if (fm < 0.0) == (flo < 0.0):
                                lo = tau
                                flo = fm
                            else:
                                hi = tau
                    sec_t[nsec] = t + tau
                    for i in range(n):
                        sec_y[nsec, i] = ytry[i]
                    sec_dir[nsec] = 1 if f1 > f0 else -1
                nsec += 1
        for i in range(n):
            y[i] = ynew[i]
            k1[i] = ks[5, i]
        if last:
            t = t_end
        else:
            t = t + hs
        if worst > amax:
            amax = worst
        fac11 = err ** expo1
        fac = fac11 / facold ** beta / safe
        fac = min(5.0, max(0.1, fac))
        hnew = hs / fac
        facold = max(err, 1e-4)
        if not last:
            h = hnew
        elif fac > 1.0:
            # a span-truncated step only informs h when it asks for a shrink
            h = min(h, hnew)
        if worst < floor_rel * amax:
            state[0] = t
            state[1] = h
            state[2] = amax
            state[3] = facold
            return NODE, nsec
    state[0] = t
    state[1] = h
    state[2] = amax
    state[3] = facold
    return OK, nsec


@njit(cache=True, error_model='numpy')
def start(kind, data, aux, y, k1, state):
    """Evaluate f(t, y) into k1 and seed the running |psi|^2 maximum."""
    a = rhs(kind, data, workspace(data), aux, state[0], y, k1)
    state[2] = max(state[2], a)
    return a


@njit(cache=True, error_model='numpy')
def benettin(kind, data, aux, y0, e0, d0, dt, nsteps, rtol, atol, hmax, floor_rel, max_evals=0.0):
    """Benettin maximal-exponent estimate for a pair of trajectories.

    The reference and the partner are advanced as one stacked system, so
    both see the same step sequence and their truncation errors largely
    cancel in the separation.  Independent adaptive steps would instead
    inject uncorrelated noise of order the local error into every interval,
    which near nodes is comparable to ``d0`` and inflates the estimate.

    Returns (running estimate per rescaling, status, completed rescalings,
    trajectory end point).  Each log stretch is taken relative to the actual
    floating-point separation after rescaling, so a frozen flow gives exactly 0.
    """
    n = y0.shape[0]
    z = np.empty(2 * n)
    for i in range(n):
        z[i] = y0[i]
        z[n + i] = y0[i] + d0 * e0[i]
    k1 = np.empty(2 * n)
    st = np.zeros(5)
    st[3] = 1e-4
    series = np.zeros(nsteps)
    dummy_t = np.empty(0)
    dummy_y = np.empty((0, 2 * n))
    dummy_d = np.empty(0, dtype=np.int64)
    a = start(kind + PAIR, data, aux, z, k1, st)
    if a <= 0.0:
        return series[:0], DOMAIN if a < 0.0 else NODE, 0, z[:n].copy()
    total = 0.0
    dist0 = _separation(z, n)
    for step in range(nsteps):
        t_end = (step + 1) * dt
        code, _ = advance(kind + PAIR, data, aux, st, z, k1, t_end, rtol, atol, hmax, floor_rel,
                          -1, 0.0, dummy_t, dummy_y, dummy_d, 0, max_evals)
        if code != OK:
            return series[:step], code, step, z[:n].copy()
        dist = _separation(z, n)
        total += math.log(dist / dist0)
        series[step] = total / t_end
        if dist != dist0:
            for i in range(n):
                z[n + i] = z[i] + d0 * (z[n + i] - z[i]) / dist
            b = start(kind + PAIR, data, aux, z, k1, st)
            if b < 0.0:
                return series[: step + 1], DOMAIN, step + 1, z[:n].copy()
            if b < floor_rel * st[2]:
                return series[: step + 1], NODE, step + 1, z[:n].copy()
            dist0 = _separation(z, n)
    return series, OK, nsteps, z[:n].copy()


@njit(cache=True, error_model='numpy')
def _separation(z, n):
    acc = 0.0
    for i in range(n):
        acc += (z[n + i] - z[i]) ** 2
    return math.sqrt(acc)
