"""Maximal Lyapunov exponents, ensemble averages and Poincare sections.

Lyapunov exponents follow the rescaling scheme: a reference trajectory and
a companion at distance ``d0`` are advanced for ``dt``, the log stretch is
accumulated and the companion is pulled back to distance ``d0`` along the
current separation.  The same compiled machinery drives the classical
Henon-Heiles flow, which serves as a benchmark.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _ode
from .basis import BasisFamily
from .dynamics import IntegratorParams, NodeProximity, TrajectoryStatus, STATUS_FROM_CODE
from .wavefunction import Configuration, WaveFunction

log = logging.getLogger(__name__)

HH_ESCAPE_RADIUS = 10.0
# a single interval stretching the separation by more than this factor means dt is
# long compared with 1/h and the estimate is capped by the size of the accessible region
SATURATION_RATIO = 1e4


class LyapunovStatus(enum.Enum):
    CONVERGED = "Converged"
    MAX_TIME = "MaxTime"
    NODE_ENCOUNTER = "NodeEncounter"
    DOMAIN_EXIT = "DomainExit"
    STEP_FAILURE = "StepFailure"
    WORK_BUDGET = "WorkBudget"

    @property
    def ok(self) -> bool:
        return self in (LyapunovStatus.CONVERGED, LyapunovStatus.MAX_TIME)


_FROM_CODE = {
    _ode.NODE: LyapunovStatus.NODE_ENCOUNTER,
    _ode.DOMAIN: LyapunovStatus.DOMAIN_EXIT,
    _ode.STEP_FAILURE: LyapunovStatus.STEP_FAILURE,
    _ode.BUDGET: LyapunovStatus.WORK_BUDGET,
}


@dataclass(frozen=True)
class LyapunovParams:
    """``e0=None`` draws a random unit direction from ``seed``."""

    d0: float = 1e-7
    dt: float = 1.0
    n_steps: int = 50_000
    e0: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.d0 > 0:
            raise ValueError(f"d0 must be positive, got {self.d0}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.e0 is not None:
            e = np.asarray(self.e0, dtype=float)
            if abs(np.linalg.norm(e) - 1.0) > 1e-12:
                raise ValueError("explicit e0 must be a unit vector")
            object.__setattr__(self, "e0", tuple(float(v) for v in e))

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def direction(self, n: int) -> np.ndarray:
        if self.e0 is not None:
            e = np.asarray(self.e0, dtype=float)
            if e.size != n:
                raise ValueError(f"e0 has {e.size} entries, configuration has {n}")
            return e
        return random_direction(np.random.default_rng(self.seed), n)


def random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    e = rng.standard_normal(n)
    return e / np.linalg.norm(e)


@dataclass
class LyapunovEstimate:
    times: np.ndarray
    h: np.ndarray
    status: LyapunovStatus
    params: LyapunovParams
    saturated: int = 0
    final_point: np.ndarray | None = None

    @property
    def final_h(self) -> float:
        return float(self.h[-1]) if len(self.h) else float("nan")

    @property
    def h_series(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.h.tolist()))

    def rows(self):
        return np.column_stack([self.times, self.h])


def _classify(h: np.ndarray, code: int, rel: float = 0.05, abs_: float = 1e-3) -> LyapunovStatus:
    if code != _ode.OK:
        return _FROM_CODE[code]
    n = len(h)
    tail = h[int(0.9 * n):]
    spread = float(tail.max() - tail.min()) if len(tail) else 0.0
    if spread <= max(rel * abs(h[-1]), abs_):
        return LyapunovStatus.CONVERGED
    return LyapunovStatus.MAX_TIME


def _count_saturation(times: np.ndarray, h: np.ndarray) -> int:
    if len(h) == 0:
        return 0
    logs = np.diff(np.concatenate([[0.0], h * times]))
    return int(np.sum(logs > math.log(SATURATION_RATIO)))


def _finish(times, series, code, params, y_end) -> LyapunovEstimate:
    series = np.asarray(series)
    times = times[: len(series)]
    status = _classify(series, code) if len(series) else _FROM_CODE.get(code, LyapunovStatus.MAX_TIME)
    sat = _count_saturation(times, series)
    if sat:
        warnings.warn(f"{sat} of {len(series)} rescaling intervals stretched the separation by more "
                      f"than {SATURATION_RATIO:g}; dt={params.dt} is too long for this flow and h is "
                      "capped by the size of the accessible region", RuntimeWarning, stacklevel=3)
    return LyapunovEstimate(times, series, status, params, sat, np.asarray(y_end))


def lyapunov(wf: WaveFunction, x0, params: LyapunovParams | None = None,
             iparams: IntegratorParams | None = None) -> LyapunovEstimate:
    """Maximal Lyapunov exponent h(x0, T) with its running series."""
    params = params or LyapunovParams()
    iparams = iparams or IntegratorParams()
    y0 = np.asarray(x0.coordinates if isinstance(x0, Configuration) else x0, dtype=float)
    if y0.shape != (wf.n_coords,):
        raise ValueError(f"expected {wf.n_coords} coordinates, got shape {y0.shape}")
    if params.d0 > 1e-4:
        warnings.warn(f"d0={params.d0} is large compared with the scale of the velocity field",
                      RuntimeWarning, stacklevel=2)
    e0 = params.direction(y0.size)
    series, code, done, y_end = _ode.benettin(
        _ode.BOHM, wf.packed, wf.inv_mass, y0, e0, params.d0, params.dt, params.n_steps,
        iparams.rel_tol, iparams.abs_tol, iparams.max_step, iparams.min_abs2,
        float(iparams.max_evals))
    times = params.dt * np.arange(1, params.n_steps + 1)
    if code != _ode.OK:
        log.info("lyapunov run stopped after %d of %d intervals: %s", done, params.n_steps,
                 _FROM_CODE[code].value)
    return _finish(times, series, code, params, y_end)


# --- ensembles -----------------------------------------------------------------

@dataclass(frozen=True)
class CubeSampler:
    """Uniform configurations in an axis-aligned cube, every coordinate of every particle."""

    edge: float = 10.0
    center: float = 0.0

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.center + self.edge * (rng.random(n) - 0.5)


def default_sampler(wf: WaveFunction) -> CubeSampler:
    """Origin-centred cube of edge 10, or the unit box for box states."""
    if BasisFamily.BOX2D in wf.families:
        return CubeSampler(edge=1.0, center=0.5)
    return CubeSampler()


def sample_seed(seed: int, i: int) -> int:
    return int(seed) ^ int(i)


def draw_sample(wf: WaveFunction, sampler: CubeSampler, seed: int, i: int
                ) -> tuple[np.ndarray, np.ndarray]:
    """Initial configuration and separation direction of ensemble member ``i``."""
    rng = np.random.default_rng(sample_seed(seed, i))
    x0 = sampler.draw(rng, wf.n_coords)
    return x0, random_direction(rng, wf.n_coords)


@dataclass
class EnsembleResult:
    mean_h: float
    std_h: float
    per_sample: list[tuple[np.ndarray, LyapunovEstimate]]
    excluded: int
    seed: int = 0

    @property
    def n_samples(self) -> int:
        return len(self.per_sample)

    @property
    def included(self) -> int:
        return self.n_samples - self.excluded

    def rows(self):
        for i, (x0, est) in enumerate(self.per_sample):
            yield [i, *x0.tolist(), est.final_h, est.status.value]

    def header(self, wf_coords: list[str]) -> list[str]:
        return ["sample", *wf_coords, "final_h", "status"]


class EnsembleError(RuntimeError):
    pass


def _one_sample(wf, sampler, seed, i, params, iparams):
    x0, e0 = draw_sample(wf, sampler, seed, i)
    p = LyapunovParams(params.d0, params.dt, params.n_steps, tuple(e0), sample_seed(seed, i))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            est = lyapunov(wf, x0, p, iparams)
        except NodeProximity:
            est = LyapunovEstimate(np.empty(0), np.empty(0), LyapunovStatus.NODE_ENCOUNTER, p)
    return x0, est


def average_lyapunov(wf: WaveFunction, sampler: CubeSampler | None = None, n_samples: int = 150,
                     params: LyapunovParams | None = None, iparams: IntegratorParams | None = None,
                     seed: int = 0, jobs: int = 1) -> EnsembleResult:
    """Mean and spread of h over sampled initial configurations.

    Sample ``i`` draws its configuration and direction from seed ``seed ^ i``,
    so the result does not depend on ``jobs`` or on scheduling.  Samples
    that end on a node, leave the domain or fail to step are excluded from
    the mean and counted.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sampler = sampler or default_sampler(wf)
    params = params or LyapunovParams()
    iparams = iparams or IntegratorParams()
    if jobs == 1:
        results = [_one_sample(wf, sampler, seed, i, params, iparams) for i in range(n_samples)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(
            delayed(_one_sample)(wf, sampler, seed, i, params, iparams) for i in range(n_samples))
    good = np.array([est.final_h for _, est in results if est.status.ok])
    excluded = n_samples - good.size
    if excluded:
        log.info("ensemble excluded %d of %d samples", excluded, n_samples)
    if good.size == 0:
        raise EnsembleError(f"all {n_samples} samples were excluded")
    return EnsembleResult(float(good.mean()), float(good.std()), results, excluded, seed)


# --- sections ------------------------------------------------------------------

@dataclass(frozen=True)
class SectionPoint:
    configuration: np.ndarray
    time: float
    direction: int
    plane: tuple[int, float] = field(default=(0, 0.0))

    @property
    def chart(self) -> np.ndarray:
        """Coordinates within the section plane (the plane coordinate dropped)."""
        return np.delete(self.configuration, self.plane[0])

    @property
    def residual(self) -> float:
        return abs(self.configuration[self.plane[0]] - self.plane[1])


def _section(kind, data, aux, y0, plane, t_max, iparams, capacity) -> tuple[list[SectionPoint], int]:
    idx, level = int(plane[0]), float(plane[1])
    if not 0 <= idx < y0.size:
        raise ValueError(f"plane coordinate {idx} outside 0..{y0.size - 1}")
    y = np.array(y0, dtype=float)
    k1 = np.empty_like(y)
    state = np.zeros(5)
    if _ode.start(kind, data, aux, y, k1, state) <= 0.0:
        raise NodeProximity("initial point is on a node or outside the domain")
    sec_t = np.empty(capacity)
    sec_y = np.empty((capacity, y.size))
    sec_d = np.empty(capacity, dtype=np.int64)
    code, n = _ode.advance(kind, data, aux, state, y, k1, float(t_max), iparams.rel_tol,
                           iparams.abs_tol, iparams.max_step, iparams.min_abs2,
                           idx, level, sec_t, sec_y, sec_d, 0, float(iparams.max_evals))
    if n > capacity:
        log.warning("section buffer full: kept %d of %d crossings", capacity, n)
        n = capacity
    pts = [SectionPoint(sec_y[i].copy(), float(sec_t[i]), int(sec_d[i]), (idx, level))
           for i in range(n)]
    return pts, code


def poincare_section(wf: WaveFunction, x0, plane: tuple[int, float], t_max: float,
                     iparams: IntegratorParams | None = None, capacity: int = 200_000
                     ) -> list[SectionPoint]:
    """All crossings of coordinate ``plane[0]`` through ``plane[1]`` up to ``t_max``.

    Crossing times are refined by bisection until the plane residual is
    below 1e-12; both directions are kept and tagged +1 / -1.
    """
    iparams = iparams or IntegratorParams()
    y0 = np.asarray(x0.coordinates if isinstance(x0, Configuration) else x0, dtype=float)
    pts, code = _section(_ode.BOHM, wf.packed, wf.inv_mass, y0, plane, t_max, iparams, capacity)
    if code != _ode.OK:
        log.info("section run stopped early: %s", STATUS_FROM_CODE[code].value)
    return pts


# --- Henon-Heiles ----------------------------------------------------------------

def henon_heiles_energy(z) -> float:
    x, y, px, py = z
    return 0.5 * (px * px + py * py) + 0.5 * (x * x + y * y) + x * x * y - y ** 3 / 3.0


def henon_heiles_point(energy: float, y: float, py: float = 0.0, x: float = 0.0) -> np.ndarray:
    """Phase point with the given (x, y, p_y) and p_x >= 0 fixed by the energy."""
    rest = 2.0 * energy - py * py - x * x - y * y - 2.0 * x * x * y + 2.0 * y ** 3 / 3.0
    if rest < 0:
        raise ValueError(f"(x, y, p_y) = {(x, y, py)} is not reachable at energy {energy}")
    return np.array([x, y, math.sqrt(rest), py])


HH_PARAMS = IntegratorParams(rel_tol=1e-13, abs_tol=1e-13, max_step=0.1)
_HH_DATA = None


def _hh_data():
    # the compiled right-hand side needs a wave-function slot; any packed state will do
    global _HH_DATA
    if _HH_DATA is None:
        from .basis import BasisState
        from .wavefunction import ProductTerm, build

        _HH_DATA = build([ProductTerm(1.0, (BasisState(BasisFamily.HARM2D, (0, 0)),))]).packed
    return _HH_DATA


def henon_heiles_lyapunov(energy: float, x0, params: LyapunovParams | None = None,
                          iparams: IntegratorParams = HH_PARAMS,
                          escape_radius: float = HH_ESCAPE_RADIUS) -> LyapunovEstimate:
    """Maximal Lyapunov exponent of the Henon-Heiles flow from phase point ``x0``.

    ``x0`` must lie on the shell H = ``energy`` to 1e-10.  Leaving the disc
    of radius ``escape_radius`` ends the run with status DomainExit.
    """
    params = params or LyapunovParams(n_steps=100_000)
    z = np.asarray(x0, dtype=float)
    if z.shape != (4,):
        raise ValueError("Henon-Heiles phase points have 4 entries (x, y, px, py)")
    if abs(henon_heiles_energy(z) - energy) > 1e-10:
        raise ValueError(f"x0 has energy {henon_heiles_energy(z)!r}, expected {energy!r}")
    aux = np.array([float(escape_radius)])
    e0 = params.direction(4)
    series, code, done, y_end = _ode.benettin(
        _ode.HENON_HEILES, _hh_data(), aux, z, e0, params.d0, params.dt, params.n_steps,
        iparams.rel_tol, iparams.abs_tol, iparams.max_step, 0.0)
    times = params.dt * np.arange(1, params.n_steps + 1)
    return _finish(times, series, code, params, y_end)


def henon_heiles_orbit(x0, t_max: float, iparams: IntegratorParams = HH_PARAMS,
                       sample_every: float = 1.0) -> tuple[np.ndarray, np.ndarray, TrajectoryStatus]:
    """Sampled reference orbit (times, phase points, status)."""
    y = np.array(x0, dtype=float)
    k1 = np.empty(4)
    aux = np.array([HH_ESCAPE_RADIUS])
    state = np.zeros(5)
    data = _hh_data()
    _ode.start(_ode.HENON_HEILES, data, aux, y, k1, state)
    e = np.empty(0), np.empty((0, 4)), np.empty(0, dtype=np.int64)
    ts, ys = [0.0], [y.copy()]
    code = _ode.OK
    n = int(round(t_max / sample_every))
    for k in range(1, n + 1):
        code, _ = _ode.advance(_ode.HENON_HEILES, data, aux, state, y, k1, k * sample_every,
                               iparams.rel_tol, iparams.abs_tol, iparams.max_step, 0.0,
                               -1, 0.0, *e, 0)
        if code != _ode.OK:
            break
        ts.append(state[0])
        ys.append(y.copy())
    return np.array(ts), np.array(ys), STATUS_FROM_CODE[code]


def henon_heiles_section(x0, t_max: float, iparams: IntegratorParams = HH_PARAMS,
                         capacity: int = 200_000) -> list[SectionPoint]:
    """Crossings of x = 0 (both directions) for the Henon-Heiles flow."""
    aux = np.array([HH_ESCAPE_RADIUS])
    pts, _ = _section(_ode.HENON_HEILES, _hh_data(), aux, np.asarray(x0, dtype=float), (0, 0.0),
                      t_max, iparams, capacity)
    return pts
