import math

import numpy as np
import pytest

from bohmchaos import states as S
from bohmchaos.dynamics import IntegratorParams, integrate
from bohmchaos.regularity import (MatchKind, RotatingFrame, com_residual, detect_structure,
                                  real_coordinates, rotating_frame)
from bohmchaos.wavefunction import ProductTerm as P, build

TIGHT = IntegratorParams(rel_tol=1e-10, abs_tol=1e-10)
A, B = S.cart2(1, 2), S.cart2(3, 0)


def two_particle_two_state(a=A, b=B):
    return build([P(1, (a, a)), P(S.E3, (a, b)), P(S.E5, (b, a)), P(S.E7, (b, b))])


def ghz(a=A, b=B):
    return build([P(1, (a, a, a)), P(S.E3, (b, b, b))])


def w_like(a=A, b=B):
    return build([P(1, (a, b, b)), P(S.E3, (b, a, b)), P(S.E7, (b, b, a))])


def test_two_particle_two_state_has_two_constants():
    rep = detect_structure(two_particle_two_state())
    assert rep.independent_count == 2
    assert {m.labels for m in rep.of_kind(MatchKind.PAIR_SEPARABLE)} == {("x1", "y1"), ("x2", "y2")}


def test_ghz_with_cartesian_factors_has_five_constants():
    rep = detect_structure(ghz())
    assert rep.independent_count == 5
    assert not rep.of_kind(MatchKind.THREE_TERM_SYMMETRIC)


def test_w_with_cartesian_factors():
    rep = detect_structure(w_like())
    pairs = rep.of_kind(MatchKind.PAIR_SEPARABLE)
    triples = rep.of_kind(MatchKind.THREE_TERM_SYMMETRIC)
    assert {m.labels for m in pairs} == {("x1", "y1"), ("x2", "y2"), ("x3", "y3")}
    assert {m.labels for m in triples} == {("x1", "x2", "x3"), ("y1", "y2", "y3")}
    assert rep.independent_count == 5


def test_three_state_two_particle_state_has_no_cross_particle_pair():
    rep = detect_structure(S.cart_triple_2p())
    cross = [m for m in rep.of_kind(MatchKind.PAIR_SEPARABLE)
             if m.coordinates[0].particle != m.coordinates[1].particle]
    assert cross == []


def test_ghz_with_polar_factors_links_radii():
    a, b = S.pol(2, 0), S.pol(1, 1)
    rep = detect_structure(ghz(a, b))
    radial = {m.labels for m in rep.of_kind(MatchKind.PAIR_SEPARABLE)}
    assert {("r1", "r2"), ("r2", "r3")} <= radial
    assert rep.independent_count == 2


def test_structure_ignores_coefficients():
    wf = two_particle_two_state()
    other = build([P(c * 0.3j + 1, t.factors) for c, t in zip(range(4), wf.terms)])
    assert detect_structure(wf).to_dict() == detect_structure(other).to_dict()


def test_spherical_pair_detected():
    wf = build([P(1, (S.sph(1, 2, 1),)), P(S.E3, (S.sph(0, 3, 1),))])
    rep = detect_structure(wf)
    assert rep.find("r1", "theta1").kind is MatchKind.SPHERICAL_PAIR


def test_real_coordinates_per_family():
    labels = [c.label for c in real_coordinates(S.ho3d_stat())]
    assert labels == ["r1", "theta1"]
    assert [c.label for c in real_coordinates(S.box_triple_2p())] == ["x1", "y1", "x2", "y2"]


def test_empty_report_is_valid():
    rep = detect_structure(build([P(1, (S.cart2(1, 0),))]))
    assert rep.matches == [] and rep.independent_count == 0
    with pytest.raises(KeyError):
        rep.find("x1", "y1")


@pytest.mark.parametrize("wf, x0", [
    (build([P(1, (S.cart2(1, 0),)), P(S.E3, (S.cart2(0, 2),))]), [0.3, -0.8]),
    (two_particle_two_state(), [0.5, -0.4, 1.1, 0.2]),
    (w_like(), [0.5, -0.4, 1.1, 0.2, -0.7, 0.3]),
    (build([P(1, (S.sph(1, 2, 1),)), P(S.E3, (S.sph(0, 3, -1),))]), [0.4, -0.3, 0.9]),
], ids=["one particle", "two particles", "W", "spherical"])
def test_constants_hold_along_trajectories(wf, x0):
    traj = integrate(wf, x0, (0, 100), TIGHT, sample_every=0.5)
    rep = detect_structure(wf)
    assert rep.matches
    for m in rep.matches:
        r = com_residual(wf, traj, m)
        assert r.value <= 1e-6, m.labels
        assert r.samples == len(traj)


def test_integral_residual_tracks_tolerance():
    wf = two_particle_two_state()
    x0 = [0.5, -0.4, 1.1, 0.2]
    m = detect_structure(wf).find("x1", "y1")
    loose = integrate(wf, x0, (0, 20), IntegratorParams(rel_tol=1e-7, abs_tol=1e-7), 0.5)
    tight = integrate(wf, x0, (0, 20), IntegratorParams(rel_tol=1e-8, abs_tol=1e-8), 0.5)
    r_loose = com_residual(wf, loose, m, method="integral").value
    r_tight = com_residual(wf, tight, m, method="integral").value
    assert r_tight * 3 <= r_loose
    assert r_loose < 1e-4


def test_broken_structure_shows_large_residual():
    wf = two_particle_two_state()
    m = detect_structure(wf).find("x1", "y1")
    chaotic = S.cart_triple_2p()
    traj = integrate(chaotic, S.REGRESSIONS["cart_triple_2p"].x0, (0, 20), sample_every=0.5)
    assert com_residual(chaotic, traj, m).value > 1e-3


def test_unknown_residual_method():
    wf = two_particle_two_state()
    traj = integrate(wf, [0.5, -0.4, 1.1, 0.2], (0, 1))
    with pytest.raises(ValueError):
        com_residual(wf, traj, detect_structure(wf).matches[0], method="magic")


def test_rotating_frame_examples():
    assert RotatingFrame.from_levels(2, 1, 1, 2).omega == 1
    assert RotatingFrame.from_levels(3, 3, 0, 2).omega == 0
    with pytest.raises(ValueError):
        RotatingFrame.from_levels(2, 1, 1, 1)


def test_rotating_frame_of_polar_pair():
    wf = build([P(1, (S.pol(2, 0),)), P(S.E3, (S.pol(0, 1),))])
    frame = rotating_frame(wf)
    assert (frame.m1, frame.m2) == (2, -1)
    assert frame.omega == pytest.approx((3 - 2) / (-1 - 2))


def test_rotating_frame_makes_density_stationary():
    wf = build([P(1, (S.pol(2, 0),)), P(S.E3, (S.pol(0, 1),))])
    # with e^{i m phi - i E t} factors the pattern turns at -omega
    w = -rotating_frame(wf).omega
    q = np.array([0.7, 0.4])
    for t in (0.5, 1.3, 4.0):
        c, s = math.cos(w * t), math.sin(w * t)
        rotated = np.array([c * q[0] - s * q[1], s * q[0] + c * q[1]])
        assert wf.evaluate(rotated, t).abs2 == pytest.approx(wf.evaluate(q, 0.0).abs2, rel=1e-12)


@pytest.mark.parametrize("wf", [
    build([P(1, (S.cart2(1, 0),)), P(1, (S.cart2(0, 1),))]),
    S.polar_pair_2p(),
])
def test_rotating_frame_rejects_other_shapes(wf):
    with pytest.raises(ValueError):
        rotating_frame(wf)
