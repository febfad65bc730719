"""Single-particle energy eigenstates of the 2-d box and the 2-d/3-d oscillators.

Units: hbar = m = omega = 1, box side 1.  All states are evaluated in
Cartesian coordinates; the polar and spherical families are written as
``(x +/- iy)^|m| * polynomial(z, r^2) * exp(-r^2/2) * L(r^2)`` so that the
gradient is regular on the z axis.  Every state is unit normalised.

Quantum numbers per family:

========== ================ =====================================
family     numbers          constraint
========== ================ =====================================
BOX2D      (n_x, n_y)       n >= 1
HARM2D     (n_x, n_y)       n >= 0
POLAR2D    (n_r, n_l)       n >= 0, angular momentum n_r - n_l
HARM3D     (n_x, n_y, n_z)  n >= 0
SPH3D      (k, l, m)        k, l >= 0, |m| <= l
========== ================ =====================================
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _field


class BasisFamily(enum.Enum):
    BOX2D = _field.BOX2D
    HARM2D = _field.HARM2D_CART
    POLAR2D = _field.HARM2D_POLAR
    HARM3D = _field.HARM3D_CART
    SPH3D = _field.HARM3D_SPH

    @property
    def dim(self) -> int:
        return 3 if self in (BasisFamily.HARM3D, BasisFamily.SPH3D) else 2

    @property
    def arity(self) -> int:
        return self.dim

    @property
    def real(self) -> bool:
        """Cartesian families have real eigenfunctions."""
        return self in (BasisFamily.BOX2D, BasisFamily.HARM2D, BasisFamily.HARM3D)

    @classmethod
    def parse(cls, name: str) -> "BasisFamily":
        key = name.strip().upper().replace("-", "").replace("_", "")
        if key in _ALIASES:
            return _ALIASES[key]
        raise ValueError(f"unknown basis family {name!r}")


_ALIASES = {
    "BOX2D": BasisFamily.BOX2D, "BOX": BasisFamily.BOX2D,
    "HARM2D": BasisFamily.HARM2D, "HARM2DCART": BasisFamily.HARM2D, "2D": BasisFamily.HARM2D,
    "POLAR2D": BasisFamily.POLAR2D, "HARM2DPOLAR": BasisFamily.POLAR2D, "POL": BasisFamily.POLAR2D,
    "HARM3D": BasisFamily.HARM3D, "HARM3DCART": BasisFamily.HARM3D, "3D": BasisFamily.HARM3D,
    "SPH3D": BasisFamily.SPH3D, "HARM3DSPH": BasisFamily.SPH3D, "SPH": BasisFamily.SPH3D,
}


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class PointEval:
    value: complex
    gradient: np.ndarray


@dataclass(frozen=True)
class BasisState:
    family: BasisFamily
    quantum_numbers: tuple[int, ...]

    def __post_init__(self):
        qn = tuple(int(n) for n in self.quantum_numbers)
        object.__setattr__(self, "quantum_numbers", qn)
        validate_quantum_numbers(self.family, qn)

    def __str__(self):
        return f"{self.family.name}{self.quantum_numbers}"

    @property
    def dim(self) -> int:
        return self.family.dim

    @property
    def energy(self) -> float:
        return energy(self)

    @property
    def angular_momentum(self) -> int:
        """L_z eigenvalue; 0 for the real Cartesian families."""
        if self.family is BasisFamily.POLAR2D:
            return self.quantum_numbers[0] - self.quantum_numbers[1]
        if self.family is BasisFamily.SPH3D:
            return self.quantum_numbers[2]
        return 0

    @cached_property
    def packed(self) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
        """(family code, quantum numbers[3], consts[4], poly) for the kernels."""
        fam = self.family
        qn = np.zeros(3, dtype=np.int64)
        qn[: len(self.quantum_numbers)] = self.quantum_numbers
        consts = np.zeros(4)
        poly = np.zeros(1)
        if fam is BasisFamily.HARM2D:
            nx, ny = self.quantum_numbers
            consts[0] = 1.0 / math.sqrt(math.pi * 2.0 ** (nx + ny) * math.factorial(nx) * math.factorial(ny))
        elif fam is BasisFamily.HARM3D:
            nx, ny, nz = self.quantum_numbers
            consts[0] = 1.0 / math.sqrt(math.pi ** 1.5 * 2.0 ** (nx + ny + nz) * math.factorial(nx)
                                        * math.factorial(ny) * math.factorial(nz))
        elif fam is BasisFamily.POLAR2D:
            nr, nl = self.quantum_numbers
            n, mu = min(nr, nl), abs(nr - nl)
            consts[:] = (math.sqrt(math.factorial(n) / (math.pi * math.factorial(n + mu))), mu, n, mu)
        elif fam is BasisFamily.SPH3D:
            k, l, m = self.quantum_numbers
            mu = abs(m)
            radial = math.sqrt(2.0 * math.factorial(k) / math.gamma(k + l + 1.5))
            ylm = math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - mu) / math.factorial(l + mu))
            sign = (-1.0) ** mu if m >= 0 else 1.0
            consts[:] = (radial * ylm * sign, l + 0.5, k, mu)
            poly = _field.spherical_poly(l, mu)
        return fam.value, qn, consts, poly


def validate_quantum_numbers(family: BasisFamily, qn: tuple[int, ...]) -> None:
    if len(qn) != family.arity:
        raise ValueError(f"{family.name} takes {family.arity} quantum numbers, got {qn}")
    if family is BasisFamily.BOX2D:
        if min(qn) < 1:
            raise ValueError(f"BOX2D quantum numbers must be >= 1, got {qn}")
    elif family is BasisFamily.SPH3D:
        k, l, m = qn
        if k < 0 or l < 0:
            raise ValueError(f"SPH3D needs k, l >= 0, got {qn}")
        if abs(m) > l:
            raise ValueError(f"SPH3D needs |m| <= l, got {qn}")
    elif min(qn) < 0:
        raise ValueError(f"{family.name} quantum numbers must be >= 0, got {qn}")


def hermite(n: int, x: float) -> tuple[float, float]:
    """Physicists' Hermite polynomial H_n(x) and its derivative 2n H_{n-1}(x)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return _field.hermite_pair(int(n), float(x))


def laguerre_assoc(n: int, alpha: float, x: float) -> tuple[float, float]:
    """Generalised Laguerre L_n^alpha(x) and d/dx L_n^alpha = -L_{n-1}^{alpha+1}."""
    if alpha <= -1:
        raise DomainError(f"alpha must be > -1, got {alpha}")
    if n < 0:
        raise ValueError("n must be >= 0")
    return _field.laguerre_pair(int(n), float(alpha), float(x))


def _plm_plain(l: int, m: int, t: float) -> float:
    st = math.sqrt(max(0.0, 1.0 - t * t))
    pmm = 1.0
    for i in range(1, m + 1):
        pmm *= -(2 * i - 1) * st
    if l == m:
        return pmm
    a, b = pmm, t * (2 * m + 1) * pmm
    for j in range(m + 2, l + 1):
        a, b = b, (t * (2 * j - 1) * b - (j + m - 1) * a) / (j - m)
    return b


def legendre_theta(l: int, mu: int, theta: float) -> tuple[float, float]:
    """P_l^mu(cos theta) (Condon-Shortley) and its theta derivative, for mu >= 0."""
    t = math.cos(theta)
    p = _plm_plain(l, mu, t)
    # Condon-Shortley: dP_l^m/dtheta = (P_l^{m+1} - (l+m)(l-m+1) P_l^{m-1}) / 2
    if mu == 0:
        dp = _plm_plain(l, 1, t) if l >= 1 else 0.0
    else:
        dp = 0.5 * ((_plm_plain(l, mu + 1, t) if mu + 1 <= l else 0.0)
                    - (l + mu) * (l - mu + 1) * _plm_plain(l, mu - 1, t))
    return p, dp


def spherical_harmonic(l: int, m: int, theta: float, phi: float) -> tuple[complex, complex, complex]:
    """Y_l^m (Condon-Shortley phase) with its theta and phi derivatives."""
    if l < 0 or abs(m) > l:
        raise DomainError(f"need |m| <= l, got l={l}, m={m}")
    mu = abs(m)
    p, dp = legendre_theta(l, mu, theta)
    k = math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - mu) / math.factorial(l + mu))
    ph = cmath.exp(1j * mu * phi)
    y, dy = k * p * ph, k * dp * ph
    if m < 0:
        sign = (-1) ** mu
        y, dy = sign * y.conjugate(), sign * dy.conjugate()
    return y, dy, 1j * m * y


def eval_state(state: BasisState, point) -> PointEval:
    """phi(point) and its Cartesian gradient."""
    p = np.asarray(point, dtype=float)
    if p.shape != (state.dim,):
        raise ValueError(f"{state} needs a {state.dim}-d point, got shape {p.shape}")
    if state.family is BasisFamily.BOX2D and (p.min() < 0.0 or p.max() > 1.0):
        raise DomainError(f"point {p} outside the unit box")
    fam, qn, consts, poly = state.packed
    z = p[2] if state.dim == 3 else 0.0
    gauss = math.exp(-0.5 * float(p @ p))
    v, gx, gy, gz = _field.basis_eval(fam, qn, consts, poly, p[0], p[1], z, gauss)
    grad = np.array([gx, gy, gz][: state.dim], dtype=complex)
    if state.family.real:
        return PointEval(complex(v.real), grad.real.astype(complex))
    return PointEval(complex(v), grad)


def energy(state: BasisState) -> float:
    fam, qn = state.family, state.quantum_numbers
    if fam is BasisFamily.BOX2D:
        return 0.5 * math.pi ** 2 * (qn[0] ** 2 + qn[1] ** 2)
    if fam in (BasisFamily.HARM2D, BasisFamily.POLAR2D):
        return qn[0] + qn[1] + 1.0
    if fam is BasisFamily.HARM3D:
        return sum(qn) + 1.5
    k, l, _ = qn
    return 2 * k + l + 1.5


def potential(family: BasisFamily, point) -> float:
    """External potential felt by one particle (zero inside the box)."""
    p = np.asarray(point, dtype=float)
    if family is BasisFamily.BOX2D:
        return 0.0
    return 0.5 * float(p @ p)
