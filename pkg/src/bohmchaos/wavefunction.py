"""Multi-particle wave functions as weighted sums of product terms.

A :class:`WaveFunction` is kept structurally (coefficients plus one
:class:`~bohmchaos.basis.BasisState` per particle per term) and evaluated
pointwise; nothing is ever sampled on a grid.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _field
from .basis import BasisFamily, BasisState, DomainError, potential

log = logging.getLogger(__name__)

STATIONARY_TOL = 1e-12


@dataclass(frozen=True)
class ProductTerm:
    coefficient: complex
    factors: tuple[BasisState, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def energy(self) -> float:
        return sum(f.energy for f in self.factors)


@dataclass(frozen=True)
class Configuration:
    coordinates: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coordinates, dtype=float).copy()
        if not np.all(np.isfinite(c)):
            raise ValueError("configuration has non-finite entries")
        c.flags.writeable = False
        object.__setattr__(self, "coordinates", c)


@dataclass(frozen=True)
class FieldEval:
    psi: complex
    grad: np.ndarray
    abs2: float


@dataclass(frozen=True, eq=False)
class WaveFunction:
    particles: int
    dimension: int
    terms: tuple[ProductTerm, ...]
    stationary_energy: float | None
    masses: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.masses:
            object.__setattr__(self, "masses", (1.0,) * self.particles)

    @property
    def n_coords(self) -> int:
        return self.particles * self.dimension

    @property
    def stationary(self) -> bool:
        return self.stationary_energy is not None

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self.terms])

    @property
    def families(self) -> set[BasisFamily]:
        return {f.family for t in self.terms for f in t.factors}

    @cached_property
    def unique_states(self) -> list[BasisState]:
        seen: dict[BasisState, None] = {}
        for t in self.terms:
            for f in t.factors:
                seen.setdefault(f, None)
        return list(seen)

    @cached_property
    def packed(self) -> tuple:
        """Flat array tuple consumed by the compiled kernels (layout in _field)."""
        states = self.unique_states
        index = {s: i for i, s in enumerate(states)}
        nu, nk, nt = len(states), self.particles, len(self.terms)
        fam = np.empty(nu, dtype=np.int64)
        qn = np.zeros((nu, 3), dtype=np.int64)
        consts = np.zeros((nu, 4))
        polys = [s.packed[3] for s in states]
        poly = np.zeros((nu, max(len(p) for p in polys)))
        for u, s in enumerate(states):
            fam[u], qn[u], consts[u], _ = s.packed
            poly[u, : len(polys[u])] = polys[u]
        used = np.zeros((nk, nu), dtype=np.int64)
        idx = np.empty((nt, nk), dtype=np.int64)
        for t, term in enumerate(self.terms):
            for k, f in enumerate(term.factors):
                idx[t, k] = index[f]
                used[k, index[f]] = 1
        box = np.array([int(any(term.factors[k].family is BasisFamily.BOX2D for term in self.terms))
                        for k in range(nk)], dtype=np.int64)
        coef = self.coefficients.astype(np.complex128)
        energies = np.array([t.energy for t in self.terms])
        tdep = 0 if self.stationary else 1
        return (fam, qn, consts, poly, used, coef, idx, np.int64(self.dimension), box, energies,
                np.int64(tdep))

    @cached_property
    def scratch(self) -> tuple:
        return _field.workspace(self.packed)

    @cached_property
    def inv_mass(self) -> np.ndarray:
        return 1.0 / np.asarray(self.masses, dtype=float)

    def scaled(self, factor: complex) -> "WaveFunction":
        terms = [ProductTerm(t.coefficient * factor, t.factors) for t in self.terms]
        return build(terms, masses=self.masses)

    def in_domain(self, q) -> bool:
        return bool(_field.in_domain(self.packed, np.asarray(q, dtype=float)))

    def potential(self, q) -> float:
        """Total external potential of the configuration."""
        x = np.asarray(q, dtype=float).reshape(self.particles, self.dimension)
        fams = [self.terms[0].factors[k].family for k in range(self.particles)]
        return sum(potential(f, xk) for f, xk in zip(fams, x))

    def evaluate(self, q, t: float | None = None) -> FieldEval:
        return evaluate(self, q, t)

    def __repr__(self):
        body = " + ".join(f"({t.coefficient:.4g})" + "".join(str(f) for f in t.factors)
                          for t in self.terms)
        return f"WaveFunction[{self.particles}x{self.dimension}d]({body})"


def build(terms, masses=()) -> WaveFunction:
    """Assemble a wave function and detect stationarity from per-term energies."""
    terms = tuple(terms)
    if not terms:
        raise ValueError("a wave function needs at least one term")
    nk = len(terms[0].factors)
    if nk == 0:
        raise ValueError("terms need at least one factor")
    dim = terms[0].factors[0].dim
    for i, t in enumerate(terms):
        if len(t.factors) != nk:
            raise ValueError(f"term {i} has {len(t.factors)} factors, expected {nk}")
        for f in t.factors:
            if f.dim != dim:
                raise ValueError(f"term {i} mixes {dim}-d and {f.dim}-d factors")
    for k in range(nk):
        box = {t.factors[k].family is BasisFamily.BOX2D for t in terms}
        if len(box) > 1:
            raise ValueError(f"particle {k} mixes box and oscillator states")
    if all(t.coefficient == 0 for t in terms):
        raise ValueError("all coefficients are zero")
    if masses and len(masses) != nk:
        raise ValueError(f"expected {nk} masses, got {len(masses)}")
    energies = [t.energy for t in terms]
    e0 = energies[0]
    stationary = all(abs(e - e0) <= STATIONARY_TOL * max(1.0, abs(e0)) for e in energies)
    return WaveFunction(nk, dim, terms, e0 if stationary else None, tuple(masses))


def normalize(wf: WaveFunction) -> WaveFunction:
    """Rescale so that sum |c_i|^2 = 1 (terms are assumed orthonormal)."""
    keys = [t.factors for t in wf.terms]
    if len(set(keys)) != len(keys):
        raise ValueError("normalize needs distinct basis products in every term")
    norm = math.sqrt(sum(abs(t.coefficient) ** 2 for t in wf.terms))
    if norm == 0:
        raise ValueError("zero-norm state")
    return wf.scaled(1.0 / norm)


def evaluate(wf: WaveFunction, q, t: float | None = None) -> FieldEval:
    """psi, full gradient and |psi|^2 at configuration ``q``.

    ``t`` only matters for non-stationary states, whose terms carry
    exp(-i E t); a :class:`Configuration` supplies its own time.
    """
    if isinstance(q, Configuration):
        if t is None:
            t = q.time
        q = q.coordinates
    x = np.asarray(q, dtype=float)
    if x.shape != (wf.n_coords,):
        raise ValueError(f"expected {wf.n_coords} coordinates, got shape {x.shape}")
    if not wf.in_domain(x):
        raise DomainError(f"configuration {x} outside the unit box")
    grad = np.empty(wf.n_coords, dtype=np.complex128)
    psi = _field.field_eval(wf.packed, wf.scratch, float(t or 0.0), x, grad)
    return FieldEval(complex(psi), grad, float(psi.real ** 2 + psi.imag ** 2))


def qubit_coefficients(wf: WaveFunction, basis0: BasisState, basis1: BasisState) -> np.ndarray:
    """The 2x2x2 tensor c_ijk with |0> -> basis0 and |1> -> basis1."""
    if wf.particles != 3:
        raise ValueError(f"qubit encoding needs 3 particles, got {wf.particles}")
    label = {basis0: 0, basis1: 1}
    c = np.zeros((2, 2, 2), dtype=complex)
    for term in wf.terms:
        try:
            i, j, k = (label[f] for f in term.factors)
        except KeyError as exc:
            raise ValueError(f"factor {exc.args[0]} is neither {basis0} nor {basis1}") from None
        c[i, j, k] += term.coefficient
    return c


def phase(abs_: float = 1.0, angle: float = 0.0) -> complex:
    return abs_ * cmath.exp(1j * angle)
