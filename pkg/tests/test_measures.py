import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmchaos import states as S
from bohmchaos.measures import (NormalizationError, WParams, _sweep_overlap, _unit, all_measures,
                                geometric_entanglement, ghz_state, max_product_overlap, meyer_wallach,
                                normalized, participation_ratio, reduced_density, three_tangle, w_state)

EPS4 = 4 * np.finfo(float).eps


def basis_tensor(i, j, k):
    t = np.zeros((2, 2, 2), dtype=complex)
    t[i, j, k] = 1
    return t


def random_product(rng):
    vs = [_unit(rng.normal(size=2) + 1j * rng.normal(size=2)) for _ in range(3)]
    return np.einsum("i,j,k->ijk", *vs)


def random_state(rng):
    t = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
    return t / np.linalg.norm(t)


W = w_state(WParams(1 / 3, 1 / 3, 1 / 3))


@pytest.mark.parametrize("c, expected", [
    ([1, 0, 0, 0], 1.0),
    ([0.5, 0.5, 0.5, 0.5], 4.0),
    (S.four_mode_coefficients(math.pi / 4), 3.6),
])
def test_participation_ratio(c, expected):
    assert participation_ratio(c) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=50)
@given(st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
def test_participation_ratio_bounds(n, seed):
    rng = np.random.default_rng(seed)
    c = normalized(rng.normal(size=n) + 1j * rng.normal(size=n))
    assert 1 - 1e-12 <= participation_ratio(c) <= n + 1e-12


@pytest.mark.parametrize("fn", [participation_ratio, meyer_wallach, geometric_entanglement, three_tangle])
def test_unnormalised_input_rejected(fn):
    with pytest.raises(NormalizationError):
        fn(2 * basis_tensor(0, 0, 0))


def test_normalized_rescales():
    c = normalized([3, 4j])
    assert np.allclose(c, [0.6, 0.8j])
    with pytest.raises(NormalizationError):
        normalized([0, 0])


def test_product_basis_state_measures():
    t = basis_tensor(0, 0, 0)
    assert meyer_wallach(t) == 0
    assert three_tangle(t) == 0
    assert geometric_entanglement(t) == pytest.approx(0, abs=1e-10)


def test_ghz_measures():
    g = ghz_state()
    assert meyer_wallach(g) == pytest.approx(1, abs=EPS4)
    assert three_tangle(g) == pytest.approx(1, abs=EPS4)
    assert geometric_entanglement(g) == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("c1", [0.3, 0.6, 0.9])
def test_ghz_closed_forms(c1):
    c2 = math.sqrt(1 - c1 ** 2) * np.exp(0.7j)
    g = ghz_state(c1, c2)
    p1, p2 = c1 ** 2, abs(c2) ** 2
    assert meyer_wallach(g) == pytest.approx(2 * (1 - p1 ** 2 - p2 ** 2), abs=1e-14)
    assert three_tangle(g) == pytest.approx(4 * p1 * p2, abs=1e-14)


def test_standard_w_measures():
    assert meyer_wallach(W) == pytest.approx(8 / 9, abs=1e-14)
    assert three_tangle(W) == pytest.approx(0, abs=1e-15)
    assert geometric_entanglement(W) == pytest.approx(5 / 9, abs=1e-8)


def _grid_overlap(t, n=60):
    """Max |<abc|psi>|^2 over a grid of real-amplitude product states with relative phases."""
    th = np.linspace(0, math.pi, n)
    ph = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    best = 0.0
    vecs = [np.array([math.cos(a / 2), math.sin(a / 2) * np.exp(1j * p)]) for a in th for p in ph]
    vecs = np.array(vecs)
    m = np.einsum("ijk,ai->ajk", t, vecs.conj())
    for b in vecs:
        mb = np.einsum("ajk,j->ak", m, b.conj())
        best = max(best, float(np.max(np.sum(np.abs(mb) ** 2, axis=1))))
    return best


def test_w_geometric_entanglement_matches_grid_oracle():
    assert _grid_overlap(W) == pytest.approx(4 / 9, abs=1e-3)
    assert 1 - max_product_overlap(W)[0] == pytest.approx(5 / 9, abs=1e-8)


@pytest.mark.parametrize("a", np.linspace(0, 0.5, 6))
def test_w_family_with_half_weight(a):
    t = w_state(WParams(a, 0.5 - a, 0.5))
    assert geometric_entanglement(t) == pytest.approx(0.5, abs=1e-8)
    assert three_tangle(t) == pytest.approx(0, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_three_tangle_vanishes_on_w_class(a, b, c):
    total = a + b + c
    if total > 1:
        a, b, c = a / total, b / total, c / total
    assert three_tangle(w_state(WParams(a, b, c))) == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("abc", [(-0.1, 0.2, 0.3), (0.5, 0.5, 0.5)])
def test_w_params_validation(abc):
    with pytest.raises(ValueError):
        WParams(*abc)


def test_w_state_examples():
    assert np.array_equal(w_state(WParams(0, 0, 0)), basis_tensor(0, 0, 0))
    t = w_state(WParams(0.25, 0.25, 0.5))
    assert t[0, 0, 1] == 0.5 and t[0, 1, 0] == 0.5 and t[1, 0, 0] == pytest.approx(math.sqrt(0.5))
    assert t[0, 0, 0] == 0


def _brute_meyer_wallach(t):
    """Linear entropy from purities summed element by element."""
    total = 0.0
    for k in range(3):
        purity = 0.0
        for a, b in itertools.product(range(2), repeat=2):
            rho = 0j
            for rest in itertools.product(range(2), repeat=2):
                ia, ib = list(rest), list(rest)
                ia.insert(k, a)
                ib.insert(k, b)
                rho += t[tuple(ia)] * np.conj(t[tuple(ib)])
            purity += abs(rho) ** 2
        total += 2 * (1 - purity)
    return total / 3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_meyer_wallach_matches_elementwise_oracle(seed):
    t = random_state(np.random.default_rng(seed))
    assert meyer_wallach(t) == pytest.approx(_brute_meyer_wallach(t), abs=1e-13)
    for k in range(3):
        rho = reduced_density(t, k)
        assert np.trace(rho).real == pytest.approx(1, abs=1e-13)
        assert np.allclose(rho, rho.conj().T)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_invariant_under_global_phase_and_relabelling(seed):
    rng = np.random.default_rng(seed)
    t = random_state(rng)
    phased = t * np.exp(1j * rng.uniform(0, 2 * math.pi))
    perm = tuple(rng.permutation(3))
    relabelled = np.transpose(t, perm)
    flipped = t[::-1, ::-1, ::-1]
    ref = all_measures(t)
    for other in (phased, relabelled, flipped):
        m = all_measures(other)
        assert m.PR == pytest.approx(ref.PR, abs=1e-10)
        assert m.Q == pytest.approx(ref.Q, abs=1e-10)
        assert m.EG == pytest.approx(ref.EG, abs=1e-10)
        assert m.tau3 == pytest.approx(ref.tau3, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_product_states_are_unentangled(seed):
    t = random_product(np.random.default_rng(seed))
    assert meyer_wallach(t) == pytest.approx(0, abs=1e-12)
    assert geometric_entanglement(t) == pytest.approx(0, abs=1e-10)
    assert three_tangle(t) == pytest.approx(0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_generic_states_are_entangled(seed):
    t = random_state(np.random.default_rng(seed))
    assert meyer_wallach(t) > 1e-6
    assert geometric_entanglement(t) > 1e-6


def test_tangle_zero_does_not_mean_separable():
    assert three_tangle(W) == pytest.approx(0, abs=1e-15)
    assert meyer_wallach(W) == pytest.approx(8 / 9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_alternating_sweeps_never_decrease_overlap(seed):
    rng = np.random.default_rng(seed)
    t = random_state(rng)
    history = []
    start = [_unit(rng.normal(size=2) + 1j * rng.normal(size=2)) for _ in range(3)]
    _sweep_overlap(t, start, history)
    assert np.all(np.diff(history) >= -1e-15)


@pytest.mark.parametrize("t", [
    W, ghz_state(), w_state(WParams(0.1, 0.4, 0.5)), w_state(WParams(0.25, 0.25, 0.25)),
], ids=["W", "GHZ", "half-weight", "quarter"])
def test_restart_spread_on_regression_states(t):
    best, values = max_product_overlap(t)
    assert len(values) == 50
    assert best - np.sort(values)[-2] <= 1e-8


def test_swapping_physical_basis_leaves_measures_unchanged():
    from bohmchaos.wavefunction import qubit_coefficients
    a, b = S.W_BASIS
    wf = S.eq101(0.3)
    direct = all_measures(qubit_coefficients(wf, a, b))
    swapped = all_measures(qubit_coefficients(wf, b, a))
    assert direct.PR == swapped.PR and direct.Q == pytest.approx(swapped.Q, abs=1e-15)
    assert direct.tau3 == pytest.approx(swapped.tau3, abs=1e-15)
    assert direct.EG == pytest.approx(swapped.EG, abs=1e-12)
