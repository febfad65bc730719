"""Guidance velocity field, trajectory integration and energy diagnostics.

Units are hbar = 1 with unit masses unless a wave function carries its own
masses, in which case particle ``k`` moves with Im(grad_k psi / psi) / m_k.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _field, _ode
from .basis import DomainError
from .wavefunction import Configuration, WaveFunction, evaluate

log = logging.getLogger(__name__)

FD_STEP = 1e-4
# sixth-order central first derivative, weights for offsets 1, 2, 3
STENCIL = (45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0)
# |psi| / |grad psi| estimates the distance to the nearest node, the length
# scale on which |psi| varies; the FD step never exceeds this fraction of it.
FD_NODE_FRACTION = 0.01


class NodeProximity(ArithmeticError):
    """|psi|^2 at the requested configuration is below the node floor."""


class TrajectoryStatus(enum.Enum):
    COMPLETED = "Completed"
    NODE_ENCOUNTER = "NodeEncounter"
    DOMAIN_EXIT = "DomainExit"
    STEP_FAILURE = "StepFailure"


STATUS_FROM_CODE = {
    _ode.OK: TrajectoryStatus.COMPLETED,
    _ode.NODE: TrajectoryStatus.NODE_ENCOUNTER,
    _ode.DOMAIN: TrajectoryStatus.DOMAIN_EXIT,
    _ode.STEP_FAILURE: TrajectoryStatus.STEP_FAILURE,
    # an exhausted evaluation budget is reported as a step failure
    _ode.BUDGET: TrajectoryStatus.STEP_FAILURE,
}


@dataclass(frozen=True)
class IntegratorParams:
    """Dormand-Prince tolerances.

    ``min_abs2`` is relative: a step whose stages see |psi|^2 below
    ``min_abs2`` times the largest |psi|^2 met so far ends the run with
    ``NodeEncounter``.

    ``max_evals`` caps the velocity evaluations of one trajectory (0 means
    no cap).  Trajectories trapped close to a nodal line circle it at a rate
    of order 1/distance^2 and can cost a million evaluations per time unit;
    ensembles use the cap to bound their run time.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-9
    max_step: float = 0.1
    min_abs2: float = 1e-24
    max_evals: int = 0

    def __post_init__(self):
        if self.max_evals < 0:
            raise ValueError(f"max_evals must be >= 0, got {self.max_evals}")
        for name in ("rel_tol", "abs_tol", "max_step", "min_abs2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.rel_tol > 1e-3 or self.abs_tol > 1e-3:
            raise ValueError("rel_tol and abs_tol must be <= 1e-3")


@dataclass(frozen=True)
class EnergyDiagnostics:
    kinetic: float
    potential: float
    quantum: float
    total: float


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    status: TrajectoryStatus
    abs2: np.ndarray
    nfev: int = 0
    energy: np.ndarray | None = None
    quantum: np.ndarray | None = None
    dimension: int = 2

    def __len__(self):
        return len(self.times)

    @property
    def samples(self) -> list[tuple[float, Configuration]]:
        return [(float(t), Configuration(x, float(t))) for t, x in zip(self.times, self.positions)]

    @property
    def final(self) -> np.ndarray:
        return self.positions[-1]

    def header(self) -> list[str]:
        axes = "xyz"[: self.dimension]
        n = self.positions.shape[1] // self.dimension
        return ["t"] + [f"{a}{k + 1}" for k in range(n) for a in axes]

    def write_csv(self, path) -> None:
        write_rows(path, self.header(), np.column_stack([self.times, self.positions]))


def write_rows(path, header, rows) -> None:
    """CSV with 17 significant digits so that floats round-trip exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def fmt(v) -> str:
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    return f"{float(v):.17g}"


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)


def _coords(wf: WaveFunction, q) -> tuple[np.ndarray, float]:
    t = 0.0
    if isinstance(q, Configuration):
        t = q.time
        q = q.coordinates
    x = np.asarray(q, dtype=float)
    if x.shape != (wf.n_coords,):
        raise ValueError(f"expected {wf.n_coords} coordinates, got shape {x.shape}")
    return x, t


def velocity(wf: WaveFunction, q, t: float | None = None, min_abs2: float = 0.0) -> np.ndarray:
    """Guidance velocity Im(grad_k psi / psi) / m_k at configuration ``q``.

    ``min_abs2`` here is an absolute floor; |psi|^2 <= min_abs2 raises
    :class:`NodeProximity` (so an exact node always raises).
    """
    x, t0 = _coords(wf, q)
    ev = evaluate(wf, x, t0 if t is None else t)
    if ev.abs2 <= min_abs2:
        raise NodeProximity(f"|psi|^2 = {ev.abs2:.3e} at {x}")
    v = (np.conj(ev.psi) * ev.grad).imag / ev.abs2
    return v * np.repeat(wf.inv_mass, wf.dimension)


def _abs_grad(wf: WaveFunction, x: np.ndarray, t: float) -> tuple[float, np.ndarray]:
    ev = evaluate(wf, x, t)
    a = math.sqrt(ev.abs2)
    return a, (np.conj(ev.psi) * ev.grad).real / a


def quantum_potential(wf: WaveFunction, q, method: str = "analytic", step: float = FD_STEP,
                      min_abs2: float = 0.0) -> EnergyDiagnostics:
    """Kinetic, potential and quantum-potential energy of a configuration.

    ``analytic`` uses the eigenvalue equation, so ``total`` equals the
    stationary energy up to rounding.  ``fd`` differentiates the analytic
    gradient of |psi| with a sixth-order central stencil of width ``step``
    and never uses the eigenvalue, which makes it an independent check.
    Near nodes the step shrinks to ``FD_NODE_FRACTION`` of the estimated
    node distance.
    """
    x, t = _coords(wf, q)
    ev = evaluate(wf, x, t)
    if ev.abs2 <= min_abs2:
        raise NodeProximity(f"|psi|^2 = {ev.abs2:.3e} at {x}")
    masses = np.repeat(np.asarray(wf.masses, dtype=float), wf.dimension)
    v = (np.conj(ev.psi) * ev.grad).imag / ev.abs2 / masses
    kinetic = 0.5 * float(np.sum(masses * v * v))
    pot = wf.potential(x)
    if method == "analytic":
        if not wf.stationary:
            raise ValueError("the analytic quantum potential needs a stationary state")
        if any(m != 1.0 for m in wf.masses):
            raise ValueError("the analytic quantum potential assumes unit masses")
        quantum = wf.stationary_energy - pot - kinetic
    elif method == "fd":
        lap = 0.0
        a0 = math.sqrt(ev.abs2)
        gnorm = float(np.linalg.norm(ev.grad))
        if gnorm > 0:
            step = min(step, FD_NODE_FRACTION * a0 / gnorm)
        for i in range(x.size):
            d = 0.0
            for k, c in enumerate(STENCIL, start=1):
                for sgn in (1, -1):
                    xi = x.copy()
                    xi[i] += sgn * k * step
                    d += sgn * c * _abs_grad(wf, xi, t)[1][i]
            lap += d / step / masses[i]
        quantum = -0.5 * lap / a0
    else:
        raise ValueError(f"unknown method {method!r}; use 'analytic' or 'fd'")
    return EnergyDiagnostics(kinetic, pot, quantum, kinetic + pot + quantum)


def _reversed_data(wf: WaveFunction, t0: float) -> tuple:
    """Packed data for integrating backwards from t0 in the variable s = t0 - t."""
    p = wf.packed
    energy = p[9]
    coef = p[5] * np.exp(-1j * energy * t0) if p[10] else p[5]
    return p[:5] + (coef,) + p[6:9] + (-energy, p[10])


def integrate(wf: WaveFunction, x0, t_span: tuple[float, float],
              params: IntegratorParams | None = None, sample_every: float = 1.0,
              diagnostics: bool = False) -> Trajectory:
    """Adaptive Dormand-Prince solution of dx/dt = v(x, t).

    Samples are taken every ``sample_every`` time units (plus the end
    point).  ``t_span`` may run backwards.  On a node encounter, domain exit
    or step failure the trajectory is truncated and the status recorded;
    the last sample is then where the integrator stopped.
    """
    params = params or IntegratorParams()
    x, _ = _coords(wf, x0)
    t0, t1 = map(float, t_span)
    if sample_every <= 0:
        raise ValueError("sample_every must be positive")
    if not wf.in_domain(x):
        raise DomainError(f"initial configuration {x} outside the unit box")
    backward = t1 < t0
    if backward:
        data, aux = _reversed_data(wf, t0), -wf.inv_mass
        span, s0 = t0 - t1, 0.0
    else:
        data, aux = wf.packed, wf.inv_mass
        span, s0 = t1 - t0, t0
    y = x.copy()
    k1 = np.empty_like(y)
    state = np.zeros(5)
    state[0] = s0
    a0 = _ode.start(_ode.BOHM, data, aux, y, k1, state)
    if a0 <= 0.0:
        raise NodeProximity(f"initial configuration {x} sits on a node")

    n_out = int(math.floor(span / sample_every + 1e-9))
    grid = [k * sample_every for k in range(1, n_out + 1)]
    if not grid or span - grid[-1] > 1e-9 * max(1.0, span):
        grid.append(span)
    times, pos, amp = [t0], [y.copy()], [a0]
    e_t, e_s, e_d = np.empty(0), np.empty((0, y.size)), np.empty(0, dtype=np.int64)
    code = _ode.OK
    ws = _field.workspace(data)
    vbuf = np.empty_like(y)
    for s in grid:
        code, _ = _ode.advance(_ode.BOHM, data, aux, state, y, k1, s0 + s, params.rel_tol,
                               params.abs_tol, params.max_step, params.min_abs2,
                               -1, 0.0, e_t, e_s, e_d, 0, float(params.max_evals))
        reached = state[0] - s0
        if code != _ode.OK and reached <= (times[-1] - t0) * (-1 if backward else 1):
            break
        times.append(t0 - reached if backward else t0 + reached)
        pos.append(y.copy())
        amp.append(_field.bohm_velocity(data, ws, aux, state[0], y, vbuf))
        if code != _ode.OK:
            break
    status = STATUS_FROM_CODE[code]
    if status is not TrajectoryStatus.COMPLETED:
        log.info("trajectory stopped at t=%.6g with status %s", times[-1], status.value)
    traj = Trajectory(np.array(times), np.array(pos), status, np.array(amp), int(state[4]),
                      dimension=wf.dimension)
    if diagnostics:
        add_energy_diagnostics(wf, traj, method="fd" if not wf.stationary else "analytic")
    return traj


def add_energy_diagnostics(wf: WaveFunction, traj: Trajectory, method: str = "fd") -> None:
    """Fill ``traj.energy`` and ``traj.quantum`` along the samples."""
    e, qv = [], []
    for t, x in zip(traj.times, traj.positions):
        d = quantum_potential(wf, Configuration(x, t), method=method)
        e.append(d.total)
        qv.append(d.quantum)
    traj.energy = np.array(e)
    traj.quantum = np.array(qv)
