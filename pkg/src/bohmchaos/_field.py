"""Compiled point kernels for basis states and product-form wave functions.

A wave function is lowered to a flat tuple of arrays (see
:meth:`bohmchaos.wavefunction.WaveFunction.packed`) so that the same
``njit`` code serves every state the package knows about.  Layout::

    fam    int64[U]        family code of each distinct basis state
    qn     int64[U, 3]     quantum numbers (family specific, see basis.py)
    consts float64[U, 4]   [norm, laguerre alpha, laguerre n, |m|]
    poly   float64[U, P]   coefficients of the z/r^2 polynomial (spherical)
    used   int64[K, U]     1 where particle k needs basis state u
    coef   complex128[T]   term coefficients
    idx    int64[T, K]     basis state of particle k in term t
    dim    int64           2 or 3
    box    int64[K]        1 if particle k lives in the unit box
    energy float64[T]      term energies, used only when tdep == 1
    tdep   int64           1 to apply exp(-i E_t t) to each term
"""

import math

import numpy as np
from numba import njit

BOX2D = 0
HARM2D_CART = 1
HARM2D_POLAR = 2
HARM3D_CART = 3
HARM3D_SPH = 4

# reassociation and contraction only; NaN and inf semantics are kept
FAST = {"nsz", "arcp", "contract", "afn", "reassoc"}


@njit(cache=True, error_model='numpy')
def hermite_pair(n, x):
    """Physicists' H_n(x) and H_n'(x) by upward recurrence."""
    if n == 0:
        return 1.0, 0.0
    hm1 = 1.0
    h = 2.0 * x
    for j in range(1, n):
        hm1, h = h, 2.0 * x * h - 2.0 * j * hm1
    return h, 2.0 * n * hm1


@njit(cache=True, error_model='numpy')
def laguerre_value(n, alpha, x):
    if n == 0:
        return 1.0
    lm1 = 1.0
    lv = 1.0 + alpha - x
    for j in range(1, n):
        lm1, lv = lv, ((2 * j + 1 + alpha - x) * lv - (j + alpha) * lm1) / (j + 1)
    return lv


@njit(cache=True, error_model='numpy')
def laguerre_pair(n, alpha, x):
    """L_n^alpha(x) and its x-derivative -L_{n-1}^{alpha+1}(x)."""
    if n == 0:
        return 1.0, 0.0
    return laguerre_value(n, alpha, x), -laguerre_value(n - 1, alpha + 1.0, x)


@njit(cache=True, error_model='numpy', inline='always', fastmath=FAST)
def basis_eval(fam, q, consts, poly, x, y, z, gauss):
    """Value and Cartesian gradient of one basis state at (x, y, z).

    ``gauss`` is exp(-r^2/2) at the point, shared by all oscillator states of
    a particle (ignored for the box).
    """
    if fam == BOX2D:
        ax = q[0] * math.pi
        ay = q[1] * math.pi
        sx = math.sin(ax * x)
        sy = math.sin(ay * y)
        v = 2.0 * sx * sy
        gx = 2.0 * ax * math.cos(ax * x) * sy
        gy = 2.0 * ay * sx * math.cos(ay * y)
        return complex(v), complex(gx), complex(gy), 0j

    norm = consts[0]
    if fam == HARM2D_CART or fam == HARM3D_CART:
        g = norm * gauss
        hx, dhx = hermite_pair(q[0], x)
        hy, dhy = hermite_pair(q[1], y)
        hz, dhz = 1.0, 0.0
        if fam == HARM3D_CART:
            hz, dhz = hermite_pair(q[2], z)
        v = g * hx * hy * hz
        gx = g * (dhx - x * hx) * hy * hz
        gy = g * hx * (dhy - y * hy) * hz
        gz = 0.0
        if fam == HARM3D_CART:
            gz = g * hx * hy * (dhz - z * hz)
        return complex(v), complex(gx), complex(gy), complex(gz)

    # polar / spherical:  norm * (x + i sgn y)^mu * B(z, s) * exp(-s/2) L_n^a(s)
    alpha = consts[1]
    nl = int(consts[2])
    mu = int(consts[3])
    sgn = 1.0
    if fam == HARM2D_POLAR:
        m = q[0] - q[1]
        z = 0.0
    else:
        m = q[2]
    if m < 0:
        sgn = -1.0
    s = x * x + y * y + z * z
    e = gauss
    lv, dl = laguerre_pair(nl, alpha, s)
    rad = e * lv
    drad = e * (dl - 0.5 * lv)  # d/ds

    w = complex(x, sgn * y)
    wp = 1.0 + 0j
    for _ in range(mu - 1):
        wp *= w
    if mu == 0:
        a = 1.0 + 0j
        da = 0j
    else:
        da = mu * wp
        a = wp * w

    b = 1.0
    bz = 0.0
    bs = 0.0
    if fam == HARM3D_SPH:
        l = q[1]
        b = 0.0
        jmax = (l - mu) // 2
        for j in range(jmax + 1):
            c = poly[j]
            pz = l - 2 * j - mu
            zp = z ** pz
            sp = s ** j
            b += c * sp * zp
            if pz > 0:
                bz += c * sp * pz * z ** (pz - 1)
            if j > 0:
                bs += c * j * s ** (j - 1) * zp

    v = norm * a * b * rad
    # d/ds of b * rad, chained through ds/dx = 2x etc.
    dbr = bs * rad + b * drad
    gx = norm * (da * b * rad + a * 2.0 * x * dbr)
    gy = norm * (1j * sgn * da * b * rad + a * 2.0 * y * dbr)
    gz = norm * a * (bz * rad + 2.0 * z * dbr)
    return v, gx, gy, gz


@njit(cache=True, error_model='numpy')
def workspace(data):
    used = data[4]
    nk, nu = used.shape
    return (np.zeros((nk, nu), dtype=np.complex128), np.zeros((nk, nu, 3), dtype=np.complex128),
            np.zeros(nk * data[7], dtype=np.complex128))


@njit(cache=True, error_model='numpy', inline='always', fastmath=FAST)
def field_eval(data, ws, t, q, grad):
    """psi(q, t); writes the full configuration gradient into ``grad``.

    ``ws`` is scratch space from :func:`workspace`.
    """
    fam, qn, consts, poly, used, coef, idx, dim, box, energy, tdep = data
    vals, grads, _ = ws
    nk = used.shape[0]
    nu = used.shape[1]
    for k in range(nk):
        x = q[k * dim]
        y = q[k * dim + 1]
        z = 0.0
        if dim == 3:
            z = q[k * dim + 2]
        gauss = 1.0
        if not box[k]:
            gauss = math.exp(-0.5 * (x * x + y * y + z * z))
        for u in range(nu):
            if used[k, u]:
                v, gx, gy, gz = basis_eval(fam[u], qn[u], consts[u], poly[u], x, y, z, gauss)
                vals[k, u] = v
                grads[k, u, 0] = gx
                grads[k, u, 1] = gy
                grads[k, u, 2] = gz
    for i in range(grad.shape[0]):
        grad[i] = 0j
    psi = 0j
    nt = coef.shape[0]
    for term in range(nt):
        c = coef[term]
        if tdep:
            c = c * complex(math.cos(energy[term] * t), -math.sin(energy[term] * t))
        prod = c
        for k in range(nk):
            prod *= vals[k, idx[term, k]]
        psi += prod
        for k in range(nk):
            other = c
            for j in range(nk):
                if j != k:
                    other *= vals[j, idx[term, j]]
            u = idx[term, k]
            for d in range(dim):
                grad[k * dim + d] += other * grads[k, u, d]
    return psi


@njit(cache=True, error_model='numpy', inline='always', fastmath=FAST)
def in_domain(data, q):
    box = data[8]
    dim = data[7]
    for k in range(box.shape[0]):
        if box[k]:
            for d in range(dim):
                c = q[k * dim + d]
                if c < 0.0 or c > 1.0:
                    return False
    return True


@njit(cache=True, error_model='numpy', inline='always', fastmath=FAST)
def bohm_velocity(data, ws, inv_mass, t, q, out):
    """Guidance velocity into ``out``; returns |psi|^2, or -1 outside the box."""
    if not in_domain(data, q):
        return -1.0
    dim = data[7]
    grad = ws[2]
    psi = field_eval(data, ws, t, q, grad)
    a2 = psi.real * psi.real + psi.imag * psi.imag
    if a2 == 0.0:
        for i in range(q.shape[0]):
            out[i] = 0.0
        return 0.0
    for i in range(q.shape[0]):
        g = grad[i]
        out[i] = (psi.real * g.imag - psi.imag * g.real) / a2 * inv_mass[i // dim]
    return a2


def spherical_poly(l, mu):
    """Coefficients a_j of r^(l-mu) d^mu P_l/dt^mu (t = z/r) as sum a_j s^j z^(l-2j-mu)."""
    out = np.zeros(max(1, (l - mu) // 2 + 1))
    for j in range((l - mu) // 2 + 1):
        out[j] = ((-1) ** j * math.comb(l, j) * math.comb(2 * l - 2 * j, l)
                  * math.factorial(l - 2 * j) / math.factorial(l - 2 * j - mu) / 2 ** l)
    return out
