"""Structural constants of motion and the rotating-frame frequency.

A wave function is inspected one scalar coordinate at a time.  Cartesian
families give one real factor per axis; polar and spherical factors give a
real radial factor (and a real polar-angle factor in 3-d) times an
azimuthal phase.  Three patterns force a conserved quantity:

``PairSeparable``
    coordinates (u, w) with psi = f1(u) g1(w) chi1 + f2(u) g2(w) chi2, so that
    f(u) du/dt = g(w) dw/dt with f = f1 f2 / (f1 f2' - f2 f1').
``SphericalPair``
    the same for (r, theta) of one 3-d particle, with an extra 1/r^2 in f.
``ThreeTermSymmetric``
    coordinates (u1, u2, u3) with the three patterns (f1 f2 f2), (f2 f1 f2),
    (f2 f2 f1), so that sum_i f(u_i) du_i/dt = 0.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisFamily, BasisState, hermite, laguerre_assoc, legendre_theta
from .dynamics import Trajectory, velocity
from .wavefunction import WaveFunction

log = logging.getLogger(__name__)

SINGULAR_REL = 1e-12


class MatchKind(enum.Enum):
    PAIR_SEPARABLE = "PairSeparable"
    SPHERICAL_PAIR = "SphericalPair"
    THREE_TERM_SYMMETRIC = "ThreeTermSymmetric"


@dataclass(frozen=True)
class Coordinate:
    """One scalar coordinate: axis 0/1/2 of a Cartesian particle, or 'r' / 'theta'."""

    particle: int
    axis: str

    @property
    def label(self) -> str:
        return f"{self.axis}{self.particle + 1}"


@dataclass(frozen=True)
class FactorFn:
    """Real one-variable factor, up to a constant and a weight shared by its kind.

    ``kind`` is 'sin' (n), 'herm' (n), 'polr' (n, |m|), 'sphr' (k, l) or
    'leg' (l, |m|).  The shared weights exp(-u^2/2) and exp(-r^2/2) are
    dropped because f = f1 f2 / (f1 f2' - f2 f1') does not see them.
    """

    kind: str
    params: tuple[int, ...]

    def __call__(self, u: float) -> tuple[float, float]:
        k, p = self.kind, self.params
        if k == "sin":
            a = p[0] * math.pi
            return math.sin(a * u), a * math.cos(a * u)
        if k == "herm":
            return hermite(p[0], u)
        if k in ("polr", "sphr"):
            n, power = p if k == "polr" else (p[0], p[1])
            alpha = p[1] if k == "polr" else p[1] + 0.5
            lv, dl = laguerre_assoc(n, alpha, u * u)
            up = u ** power
            dup = power * u ** (power - 1) if power else 0.0
            return up * lv, dup * lv + up * 2.0 * u * dl
        if k == "leg":
            return legendre_theta(p[0], p[1], u)
        raise ValueError(f"unknown factor kind {k!r}")


def _factor(state: BasisState, axis: str) -> FactorFn | None:
    fam, q = state.family, state.quantum_numbers
    if fam is BasisFamily.BOX2D and axis in ("x", "y"):
        return FactorFn("sin", (q["xy".index(axis)],))
    if fam in (BasisFamily.HARM2D, BasisFamily.HARM3D) and axis in "xyz"[: state.dim]:
        return FactorFn("herm", (q["xyz".index(axis)],))
    if fam is BasisFamily.POLAR2D and axis == "r":
        nr, nl = q
        return FactorFn("polr", (min(nr, nl), abs(nr - nl)))
    if fam is BasisFamily.SPH3D:
        k, l, m = q
        if axis == "r":
            return FactorFn("sphr", (k, l))
        if axis == "theta":
            return FactorFn("leg", (l, abs(m)))
    return None


def real_coordinates(wf: WaveFunction) -> list[Coordinate]:
    """Coordinates along which every term has a real factor of the forms above."""
    out = []
    for k in range(wf.particles):
        fams = {t.factors[k].family for t in wf.terms}
        if fams <= {BasisFamily.BOX2D, BasisFamily.HARM2D, BasisFamily.HARM3D}:
            axes = "xyz"[: wf.dimension]
        elif fams == {BasisFamily.POLAR2D}:
            axes = ("r",)
        elif fams == {BasisFamily.SPH3D}:
            axes = ("r", "theta")
        else:
            axes = ()
        out.extend(Coordinate(k, a) for a in axes)
    return out


def _fn(wf: WaveFunction, term: int, c: Coordinate) -> FactorFn:
    return _factor(wf.terms[term].factors[c.particle], c.axis)


@dataclass(frozen=True)
class StructureMatch:
    kind: MatchKind
    coordinates: tuple[Coordinate, ...]
    f: tuple[FactorFn, FactorFn]
    g: tuple[FactorFn, FactorFn] | None = None
    states: tuple[tuple[BasisState, ...], ...] = ()

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.coordinates)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "coordinates": list(self.labels),
             "f": [f"{fn.kind}{fn.params}" for fn in self.f]}
        if self.g is not None:
            d["g"] = [f"{fn.kind}{fn.params}" for fn in self.g]
        d["terms_basis"] = [[str(s) for s in row] for row in self.states]
        return d


@dataclass
class StructureReport:
    matches: list[StructureMatch] = field(default_factory=list)
    independent_count: int = 0

    def of_kind(self, kind: MatchKind) -> list[StructureMatch]:
        return [m for m in self.matches if m.kind is kind]

    def find(self, *labels: str) -> StructureMatch:
        for m in self.matches:
            if m.labels == labels:
                return m
        raise KeyError(labels)

    def to_dict(self) -> dict:
        return {"independent_count": self.independent_count,
                "matches": [m.to_dict() for m in self.matches]}


def _pair(wf, u: Coordinate, w: Coordinate):
    pairs = {(_fn(wf, t, u), _fn(wf, t, w)) for t in range(len(wf.terms))}
    if len(pairs) != 2:
        return None
    (f1, g1), (f2, g2) = sorted(pairs, key=repr)
    if f1 == f2 or g1 == g2:
        return None
    return (f1, f2), (g1, g2)


def _three(wf, cs: tuple[Coordinate, ...]):
    pats = {tuple(_fn(wf, t, c) for c in cs) for t in range(len(wf.terms))}
    if len(pats) != 3:
        return None
    fns = {fn for p in pats for fn in p}
    if len(fns) != 2:
        return None
    for f1, f2 in itertools.permutations(fns):
        if pats == {(f1, f2, f2), (f2, f1, f2), (f2, f2, f1)}:
            return f1, f2
    return None


def detect_structure(wf: WaveFunction) -> StructureReport:
    """Enumerate coordinate pairs and triples whose terms fit the patterns above.

    Depends only on the basis factors, never on the coefficients.
    ``independent_count`` counts pair constants as edges of a graph on
    coordinates (one constant per edge of a spanning forest) plus one per
    three-term match.
    """
    coords = real_coordinates(wf)
    states = tuple(tuple(t.factors) for t in wf.terms)
    matches = []
    for u, w in itertools.combinations(coords, 2):
        radial_theta = {u.axis, w.axis} == {"r", "theta"}
        if "theta" in (u.axis, w.axis) and not (radial_theta and u.particle == w.particle):
            continue
        if radial_theta:
            u, w = (u, w) if u.axis == "r" else (w, u)
        hit = _pair(wf, u, w)
        if hit:
            kind = MatchKind.SPHERICAL_PAIR if radial_theta else MatchKind.PAIR_SEPARABLE
            matches.append(StructureMatch(kind, (u, w), hit[0], hit[1], states))
    for cs in itertools.combinations([c for c in coords if c.axis != "theta"], 3):
        hit = _three(wf, cs)
        if hit:
            matches.append(StructureMatch(MatchKind.THREE_TERM_SYMMETRIC, cs, hit, None, states))
    return StructureReport(matches, _independent(coords, matches))


def _independent(coords, matches) -> int:
    parent = {c: c for c in coords}

    def root(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    edges = 0
    for m in matches:
        if m.kind is MatchKind.THREE_TERM_SYMMETRIC:
            continue
        a, b = root(m.coordinates[0]), root(m.coordinates[1])
        if a != b:
            parent[a] = b
            edges += 1
    return edges + sum(m.kind is MatchKind.THREE_TERM_SYMMETRIC for m in matches)


# --- residuals -------------------------------------------------------------

def _value_and_rate(dim: int, c: Coordinate, q: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    base = c.particle * dim
    if c.axis in ("x", "y", "z"):
        i = base + "xyz".index(c.axis)
        return q[i], v[i]
    x, vx = q[base: base + dim], v[base: base + dim]
    r = float(np.linalg.norm(x))
    if c.axis == "r":
        return r, float(x @ vx) / r
    rho = math.hypot(x[0], x[1])
    theta = math.atan2(rho, x[2])
    dtheta = (x[2] * (x[0] * vx[0] + x[1] * vx[1]) / rho - rho * vx[2]) / (r * r)
    return theta, dtheta


def _density(pair: tuple[FactorFn, FactorFn], u: float) -> float | None:
    """f1 f2 / (f1 f2' - f2 f1'), or None where the denominator vanishes."""
    (a, da), (b, db) = pair[0](u), pair[1](u)
    w = a * db - b * da
    if w == 0.0 or abs(w) <= SINGULAR_REL * (abs(a * db) + abs(b * da)):
        return None
    return a * b / w


def _weight(match: StructureMatch, i: int, value: float) -> float:
    return 1.0 / (value * value) if (match.kind is MatchKind.SPHERICAL_PAIR and i == 0) else 1.0


@dataclass(frozen=True)
class ResidualReport:
    value: float
    samples: int
    skipped: int
    method: str

    def __float__(self):
        return self.value


def _densities(match: StructureMatch, vals: list[float]) -> list[float] | None:
    out = []
    for i, u in enumerate(vals):
        fns = match.f if (i == 0 or match.kind is MatchKind.THREE_TERM_SYMMETRIC) else match.g
        d = _density(fns, u)
        if d is None:
            return None
        out.append(d * _weight(match, i, u))
    return out


def _signs(match: StructureMatch) -> list[float]:
    if match.kind is MatchKind.THREE_TERM_SYMMETRIC:
        return [1.0, 1.0, 1.0]
    return [1.0, -1.0]


def com_residual(wf: WaveFunction, traj: Trajectory, match: StructureMatch,
                 method: str = "differential") -> ResidualReport:
    """Largest violation of the constant of motion ``match`` along ``traj``.

    ``differential`` checks f(u) du/dt - g(w) dw/dt (or sum f(u_i) du_i/dt)
    at each sample with rates from the velocity field.  That identity holds
    pointwise, so it certifies the structure but not the integrator.
    ``integral`` accumulates C = F(u) - G(w) (or sum F(u_i)) along the path
    by adaptive quadrature between consecutive samples and reports
    max |C(t) - C(0)|, which does measure integration error.  Samples where
    a denominator f1 f2' - f2 f1' vanishes are skipped and counted.
    """
    signs = _signs(match)
    if method == "differential":
        worst, skipped = 0.0, 0
        for t, q in zip(traj.times, traj.positions):
            v = velocity(wf, q, t)
            vr = [_value_and_rate(wf.dimension, c, q, v) for c in match.coordinates]
            dens = _densities(match, [u for u, _ in vr])
            if dens is None:
                skipped += 1
                continue
            worst = max(worst, abs(sum(s * d * r for s, d, (_, r) in zip(signs, dens, vr))))
        return ResidualReport(worst, len(traj), skipped, method)
    if method == "integral":
        from scipy.integrate import quad

        zero = np.zeros(wf.n_coords)
        vals = np.array([[_value_and_rate(wf.dimension, c, q, zero)[0] for c in match.coordinates]
                         for q in traj.positions])
        acc, worst, skipped = 0.0, 0.0, 0
        for j in range(1, len(vals)):
            step = 0.0
            for i, s in enumerate(signs):
                fns = match.f if (i == 0 or match.kind is MatchKind.THREE_TERM_SYMMETRIC) else match.g

                def dens(u, fns=fns, i=i):
                    d = _density(fns, u)
                    return 0.0 if d is None else d * _weight(match, i, u)

                a, b = vals[j - 1, i], vals[j, i]
                if a != b:
                    step += s * quad(dens, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
            if not math.isfinite(step):
                skipped += 1
                continue
            acc += step
            worst = max(worst, abs(acc))
        return ResidualReport(worst, len(traj), skipped, method)
    raise ValueError(f"unknown method {method!r}")


# --- rotating frame ----------------------------------------------------------

@dataclass(frozen=True)
class RotatingFrame:
    omega: float
    m1: int
    m2: int
    E1: float
    E2: float

    @classmethod
    def from_levels(cls, E1: float, E2: float, m1: int, m2: int) -> "RotatingFrame":
        if m1 == m2:
            raise ValueError("equal azimuthal numbers: the pair has no rotating frame")
        return cls((E1 - E2) / (m2 - m1), int(m1), int(m2), float(E1), float(E2))


def rotating_frame(wf: WaveFunction) -> RotatingFrame:
    """Frame in which a two-term single-particle polar/spherical superposition is stationary."""
    if wf.particles != 1 or len(wf.terms) != 2:
        raise ValueError("need a single-particle superposition of exactly two terms")
    (a,), (b,) = (t.factors for t in wf.terms)
    for s in (a, b):
        if s.family not in (BasisFamily.POLAR2D, BasisFamily.SPH3D):
            raise ValueError(f"{s} is not of the form f(r, theta) exp(i m phi)")
    return RotatingFrame.from_levels(a.energy, b.energy, a.angular_momentum, b.angular_momentum)
