"""Participation ratio and three-qubit entanglement measures.

Every measure depends only on the coefficients, never on which physical
eigenstates carry them.  Inputs must be normalised; :func:`normalized`
rescales and logs the factor for callers that start from unnormalised
superpositions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

NORM_TOL = 1e-12
EG_RESTARTS = 50
EG_TOL = 1e-12
EG_MAX_SWEEPS = 10_000


class NormalizationError(ValueError):
    pass


def _check_norm(c: np.ndarray) -> None:
    n = float(np.sum(np.abs(c) ** 2))
    if abs(n - 1.0) > NORM_TOL:
        raise NormalizationError(f"coefficients have squared norm {n!r}, expected 1")


def normalized(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    n = math.sqrt(float(np.sum(np.abs(c) ** 2)))
    if n == 0:
        raise NormalizationError("zero vector")
    if abs(n - 1.0) > NORM_TOL:
        log.info("normalising coefficients by 1/%.12g", n)
    return c / n


def participation_ratio(c) -> float:
    """1 / sum |c_i|^4 for a normalised coefficient vector."""
    c = np.asarray(c, dtype=complex).ravel()
    _check_norm(c)
    p = np.abs(c) ** 2
    return float(1.0 / np.sum(p * p))


@dataclass(frozen=True)
class WParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0 or self.a + self.b + self.c > 1 + 1e-15:
            raise ValueError(f"need a, b, c >= 0 and a + b + c <= 1, got {(self.a, self.b, self.c)}")


def w_state(params: WParams) -> np.ndarray:
    """sqrt(a)|001> + sqrt(b)|010> + sqrt(c)|100> + sqrt(1-a-b-c)|000> as a 2x2x2 tensor."""
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, 0, 1] = math.sqrt(params.a)
    t[0, 1, 0] = math.sqrt(params.b)
    t[1, 0, 0] = math.sqrt(params.c)
    t[0, 0, 0] = math.sqrt(w_remainder(params.a, params.b, params.c))
    return t


def w_remainder(a: float, b: float, c: float) -> float:
    """1 - a - b - c with rounding noise snapped to zero.

    Without this, a = b = c = 1/3 leaves ~1e-16, whose square root (~1e-8)
    is a spurious |000> amplitude large enough to shift E_G by 1e-8.
    """
    rest = 1.0 - (a + b + c)
    return 0.0 if rest < 8 * np.finfo(float).eps else rest


def ghz_state(c1: complex = 1 / math.sqrt(2), c2: complex = 1 / math.sqrt(2)) -> np.ndarray:
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, 0, 0] = c1
    t[1, 1, 1] = c2
    return t


def _tensor(s) -> np.ndarray:
    t = np.asarray(s, dtype=complex)
    if t.shape != (2, 2, 2):
        t = t.reshape(2, 2, 2)
    _check_norm(t)
    return t


def reduced_density(s, k: int) -> np.ndarray:
    """Single-qubit reduced density matrix of qubit ``k`` by explicit partial trace."""
    t = np.moveaxis(_tensor(s), k, 0).reshape(2, 4)
    return t @ t.conj().T


def meyer_wallach(s) -> float:
    """Average linear entropy 2(1 - tr rho_k^2) over the three qubits."""
    total = 0.0
    for k in range(3):
        rho = reduced_density(s, k)
        total += 2.0 * (1.0 - float(np.real(np.trace(rho @ rho))))
    return total / 3.0


def three_tangle(s) -> float:
    """tau_3 = 4 |d1 - 2 d2 + 4 d3| (Coffman-Kundu-Wootters hyperdeterminant)."""
    c = _tensor(s)
    c000, c001, c010, c011 = c[0, 0, 0], c[0, 0, 1], c[0, 1, 0], c[0, 1, 1]
    c100, c101, c110, c111 = c[1, 0, 0], c[1, 0, 1], c[1, 1, 0], c[1, 1, 1]
    d1 = c000**2 * c111**2 + c001**2 * c110**2 + c010**2 * c101**2 + c100**2 * c011**2
    d2 = (c000 * c111 * c011 * c100 + c000 * c111 * c101 * c010 + c000 * c111 * c110 * c001
          + c011 * c100 * c101 * c010 + c011 * c100 * c110 * c001 + c101 * c010 * c110 * c001)
    d3 = c000 * c110 * c101 * c011 + c111 * c001 * c010 * c100
    return float(4.0 * abs(d1 - 2.0 * d2 + 4.0 * d3))


@njit(cache=True)
def _sweeps(t, a, b, c, tol, max_sweeps, history):
    """Alternating single-site maximisation of |<a b c|psi>|; updates a, b, c in place."""
    prev = -1.0
    ov2 = 0.0
    n = 0
    while n < max_sweeps:
        for i in range(2):
            a[i] = 0.0
            for j in range(2):
                for k in range(2):
                    a[i] += t[i, j, k] * np.conj(b[j]) * np.conj(c[k])
        _normalise(a)
        for j in range(2):
            b[j] = 0.0
            for i in range(2):
                for k in range(2):
                    b[j] += t[i, j, k] * np.conj(a[i]) * np.conj(c[k])
        _normalise(b)
        for k in range(2):
            c[k] = 0.0
            for i in range(2):
                for j in range(2):
                    c[k] += t[i, j, k] * np.conj(a[i]) * np.conj(b[j])
        ov2 = (c[0] * np.conj(c[0]) + c[1] * np.conj(c[1])).real
        _normalise(c)
        history[n] = ov2
        n += 1
        if ov2 - prev < tol:
            break
        prev = ov2
    return ov2, n


@njit(cache=True)
def _normalise(v):
    nrm = np.sqrt((v[0] * np.conj(v[0]) + v[1] * np.conj(v[1])).real)
    if nrm > 0:
        v[0] /= nrm
        v[1] /= nrm
    else:
        v[0] = 1.0
        v[1] = 0.0


def _sweep_overlap(t: np.ndarray, vecs: list[np.ndarray], history: list[float] | None = None
                   ) -> tuple[float, list[np.ndarray]]:
    """Alternating single-site maximisation of |<a b c|psi>|^2 from ``vecs``.

    Each single-site update is the exact maximiser with the other two sites
    fixed, so the sequence of overlaps never decreases.
    """
    a, b, c = (np.array(v, dtype=np.complex128) for v in vecs)
    hist = np.empty(EG_MAX_SWEEPS)
    ov2, n = _sweeps(np.ascontiguousarray(t, dtype=np.complex128), a, b, c, EG_TOL, EG_MAX_SWEEPS, hist)
    if history is not None:
        history.extend(hist[:n].tolist())
    return float(ov2), [a, b, c]


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.array([1.0, 0.0], dtype=complex)


def _hosvd_start(t: np.ndarray) -> list[np.ndarray]:
    out = []
    for k in range(3):
        m = np.moveaxis(t, k, 0).reshape(2, 4)
        u, _, _ = np.linalg.svd(m)
        out.append(u[:, 0].copy())
    return out


def max_product_overlap(s, restarts: int = EG_RESTARTS, seed: int = 0) -> tuple[float, np.ndarray]:
    """Best squared overlap with a product state and the per-restart values.

    One restart starts from the leading singular vectors of the three
    unfoldings; the others from random complex vectors drawn from ``seed``.
    """
    t = _tensor(s)
    rng = np.random.default_rng(seed)
    values = []
    for r in range(restarts):
        if r == 0:
            start = _hosvd_start(t)
        else:
            start = [_unit(rng.standard_normal(2) + 1j * rng.standard_normal(2)) for _ in range(3)]
        values.append(_sweep_overlap(t, start)[0])
    values = np.array(values)
    return float(values.max()), values


def geometric_entanglement(s, restarts: int = EG_RESTARTS, seed: int = 0) -> float:
    """1 - max |<a b c|psi>|^2 over single-qubit states a, b, c."""
    best, _ = max_product_overlap(s, restarts, seed)
    return max(0.0, 1.0 - best)


@dataclass(frozen=True)
class MeasureRow:
    PR: float
    Q: float
    EG: float
    tau3: float


def all_measures(tensor) -> MeasureRow:
    t = normalized(tensor).reshape(2, 2, 2)
    return MeasureRow(participation_ratio(t), meyer_wallach(t), geometric_entanglement(t),
                      three_tangle(t))
