"""Catalogue of the stationary states and parametrised families studied here.

Every entry is written exactly as published, unnormalised where the
original is; the velocity field does not care about overall scale.
Initial configurations are the ones used for the single-trajectory figures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisFamily, BasisState
from .measures import w_remainder
from .wavefunction import ProductTerm, WaveFunction, build, phase

F = BasisFamily


def sph(k, l, m):
    return BasisState(F.SPH3D, (k, l, m))


def cart3(nx, ny, nz):
    return BasisState(F.HARM3D, (nx, ny, nz))


def cart2(nx, ny):
    return BasisState(F.HARM2D, (nx, ny))


def pol(nr, nl):
    return BasisState(F.POLAR2D, (nr, nl))


def box(nx, ny):
    return BasisState(F.BOX2D, (nx, ny))


def spherical_to_cartesian(r, theta, phi):
    return np.array([r * math.sin(theta) * math.cos(phi),
                     r * math.sin(theta) * math.sin(phi),
                     r * math.cos(theta)])


def _wf(*pairs):
    return build([ProductTerm(c, f if isinstance(f, tuple) else (f,)) for c, f in pairs])


E3, E5, E7 = phase(1, math.pi / 3), phase(1, math.pi / 5), phase(1, math.pi / 7)


def ho3d_stat() -> WaveFunction:
    """Three spherical oscillator states at energy 9/2."""
    return _wf((1, sph(0, 3, 1)), (E3, sph(0, 3, 0)), (E7, sph(1, 1, 0)))


def ho3d_stat_cart() -> WaveFunction:
    """Three Cartesian oscillator states at energy 9/2, nodal plane x = 0."""
    return _wf((1, cart3(1, 1, 1)), (E3, cart3(3, 0, 0)), (E7, cart3(1, 2, 0)))


def ho3d_cart_nodal_line(y: float, sign: int = 1) -> np.ndarray:
    """Closed-form point on the non-planar nodal lines of :func:`ho3d_stat_cart`."""
    s, c = math.sin(math.pi / 7), math.cos(math.pi / 7)
    x = sign * math.sqrt(1.5 + s - 2 * y * y * s)
    z = (1 - 2 * y * y) * (3 * c - math.sqrt(3) * s) / (6 * math.sqrt(2) * y)
    return np.array([x, y, z])


def polar_pair_2p() -> WaveFunction:
    """Two particles, two polar oscillator states each (energy 6)."""
    a, b = pol(1, 1), pol(2, 0)
    return _wf((1, (a, a)), (E3, (a, b)), (E5, (b, a)), (E7, (b, b)))


def cart_triple_2p() -> WaveFunction:
    """Two particles in three Cartesian oscillator states (energy 6)."""
    return _wf((1, (cart2(1, 1),) * 2), (E3, (cart2(2, 0),) * 2), (E7, (cart2(0, 2),) * 2))


def box_triple_2p() -> WaveFunction:
    """Two particles in the box with degenerate states (7,1), (1,7), (5,5)."""
    return _wf((1, (box(7, 1),) * 2), (E3, (box(1, 7),) * 2), (E7, (box(5, 5),) * 2))


def polar_w_3p() -> WaveFunction:
    """W-type three-particle state on polar states (3,1) and (4,0)."""
    a, b = pol(3, 1), pol(4, 0)
    return _wf((1, (a, b, b)), (E3, (b, a, b)), (E7, (b, b, a)))


def cart_triple_3p() -> WaveFunction:
    """Three particles, GHZ-like sum over three Cartesian oscillator states."""
    return _wf((1, (cart2(3, 1),) * 3), (E3, (cart2(4, 0),) * 3), (E7, (cart2(2, 2),) * 3))


def box_triple_3p() -> WaveFunction:
    """Three particles in the box, states (5,5), (7,1), (1,7)."""
    return _wf((1, (box(5, 5),) * 3), (E3, (box(7, 1),) * 3), (E7, (box(1, 7),) * 3))


@dataclass(frozen=True)
class Regression:
    name: str
    make: callable
    x0: tuple[float, ...]
    h: float
    tol: float
    band: tuple[float, float] | None = None

    @property
    def interval(self) -> tuple[float, float]:
        if self.band is not None:
            return self.band
        return self.h - self.tol, self.h + self.tol


REGRESSIONS = {
    "ho3d_stat": Regression("ho3d_stat", ho3d_stat,
                            tuple(spherical_to_cartesian(6.6969, 2.38696, -0.249865)), 0.06, 0.02),
    "ho3d_stat_cart": Regression("ho3d_stat_cart", ho3d_stat_cart,
                                 (-2.212756, -1.97466, 0.179963), 0.06, 0.02),
    "polar_pair_2p": Regression("polar_pair_2p", polar_pair_2p,
                                (2.37166, -0.374916, -0.522219, 2.99893), 0.17, 0.05),
    "cart_triple_2p": Regression("cart_triple_2p", cart_triple_2p,
                                 (3.29867, 3.97517, 3.15679, -3.75662), 0.08, 0.03),
    "box_triple_2p": Regression("box_triple_2p", box_triple_2p,
                                (0.666891, 0.584026, 0.193745, 0.747208), 25.0, 15.0, (10.0, 40.0)),
    "polar_w_3p": Regression("polar_w_3p", polar_w_3p,
                             (1.40802, -3.0515, 0.97766, 1.33025, -1.971814, 1.64945), 0.12, 0.04),
    "cart_triple_3p": Regression("cart_triple_3p", cart_triple_3p,
                                 (-2.98281, -1.92732, 2.84168, -0.12871, -2.43547, -0.292984),
                                 0.19, 0.06),
    "box_triple_3p": Regression("box_triple_3p", box_triple_3p,
                                (0.383739, 0.882733, 0.464473, 0.481246, 0.616311, 0.586823),
                                25.0, 15.0, (10.0, 40.0)),
}


# --- parametrised families ------------------------------------------------

def _four_mode(states, alpha, beta):
    ca, sa = math.cos(alpha), math.sin(alpha)
    amps = [ca, sa, ca * ca, sa * sa]
    phases = [0.0, beta + math.pi / 3, 2 * math.pi * math.cos(beta) + math.pi / 5,
              -2 * beta + math.pi / 7]
    norm = math.sqrt(sum(a * a for a in amps))
    terms = [ProductTerm(phase(a / norm, p), (s,)) for a, p, s in zip(amps, phases, states)
             if a != 0.0]
    return build(terms)


def eq31(alpha: float, beta: float = 0.0) -> WaveFunction:
    """Four spherical states at energy 13/2 with amplitudes set by alpha, phases by beta."""
    return _four_mode([sph(1, 3, 0), sph(1, 3, 1), sph(2, 1, -1), sph(2, 1, 0)], alpha, beta)


def eq32(alpha: float, beta: float = 0.0) -> WaveFunction:
    """Same coefficients as :func:`eq31` on states of energy 17/2."""
    return _four_mode([sph(2, 3, 2), sph(2, 3, -1), sph(3, 1, 1), sph(3, 1, 0)], alpha, beta)


def four_mode_coefficients(alpha: float, beta: float = 0.0) -> np.ndarray:
    """Normalised coefficient vector shared by :func:`eq31` and :func:`eq32`."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    amps = np.array([ca, sa, ca * ca, sa * sa])
    phases = np.array([0.0, beta + math.pi / 3, 2 * math.pi * math.cos(beta) + math.pi / 5,
                       -2 * beta + math.pi / 7])
    return amps * np.exp(1j * phases) / np.linalg.norm(amps)


def w_tensor(a: float, b: float, c: float) -> np.ndarray:
    """sqrt(a)|001> + sqrt(b)|010> + sqrt(c)|100> + sqrt(1-a-b-c)|000>."""
    if min(a, b, c) < 0 or a + b + c > 1 + 1e-15:
        raise ValueError(f"need a, b, c >= 0 and a + b + c <= 1, got {(a, b, c)}")
    rest = w_remainder(a, b, c)
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, 0, 1] = math.sqrt(a)
    t[0, 1, 0] = math.sqrt(b)
    t[1, 0, 0] = math.sqrt(c)
    t[0, 0, 0] = math.sqrt(rest)
    return t


def from_qubits(tensor: np.ndarray, basis0: BasisState, basis1: BasisState) -> WaveFunction:
    """Three-particle wave function with |0> -> basis0, |1> -> basis1."""
    states = (basis0, basis1)
    terms = [ProductTerm(tensor[i, j, k], (states[i], states[j], states[k]))
             for i in range(2) for j in range(2) for k in range(2) if tensor[i, j, k] != 0]
    return build(terms)


W_BASIS = (pol(4, 0), pol(3, 1))
W_PRIME_BASIS = (pol(4, 2), pol(3, 3))


def eq100(a: float) -> WaveFunction:
    return from_qubits(w_tensor(a, 0.5 - a, 0.5), *W_BASIS)


def eq101(a: float) -> WaveFunction:
    return from_qubits(w_tensor(a, 0.25, 0.25), *W_BASIS)


def eq101_prime(a: float) -> WaveFunction:
    return from_qubits(w_tensor(a, 0.25, 0.25), *W_PRIME_BASIS)


GENERATORS = {
    "eq31": eq31,
    "eq32": eq32,
    "eq100": eq100,
    "eq101": eq101,
    "eq101-prime": eq101_prime,
}
