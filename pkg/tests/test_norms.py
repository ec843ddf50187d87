"""Concentration functionals against closed-form and 1D-quadrature oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import eval_legendre

from eigenlab import (
    ConvergenceError,
    Geodesic,
    Tube,
    UsageError,
    ball_mass,
    highest_weight,
    highest_weight_constant,
    kn_norm,
    lp_norm,
    random_harmonic,
    restriction_norm,
    sup_ball_mass,
    sup_norm,
    sup_restriction_norm,
    torus_eigenfunction,
    tube_mass,
    zonal,
)

FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi


def const_lp(p: float) -> float:
    """L^p norm of the constant L^2-normalized function on the sphere."""
    return FOUR_PI ** (1.0 / p) / math.sqrt(FOUR_PI)


# ------------------------------------------------------------------ L^p norms

def test_lp_constant_all_paths():
    e = zonal(0)
    for p in (1.0, 2.0, 3.0, 4.0, 2.5, 6.0):
        rep = lp_norm(e, p)
        assert rep.value == pytest.approx(const_lp(p), rel=1e-9)
    assert lp_norm(e, math.inf).value == pytest.approx(1 / math.sqrt(FOUR_PI), rel=1e-9)


def test_l2_is_one():
    for e in (zonal(25), highest_weight(40), random_harmonic(30, seed=2)):
        rep = lp_norm(e, 2.0)
        assert rep.value == pytest.approx(1.0, abs=1e-10)
        assert rep.error_estimate == 0.0
        assert rep.meta["exact"]


def test_l4_highest_weight_degree_one():
    # |c_1 x_1|^4 integrates to c_1^4 * 4pi/5 = 9/(20 pi)
    rep = lp_norm(highest_weight(1), 4.0)
    assert rep.value == pytest.approx((9 / (20 * math.pi)) ** 0.25, rel=1e-12)


def test_l1_zonal_against_1d_quadrature():
    k = 12
    e = zonal(k)
    norm = math.sqrt((2 * k + 1) / FOUR_PI)
    ref = TWO_PI * norm * quad(
        lambda t: abs(eval_legendre(k, t)), -1, 1, limit=200)[0]
    rep = lp_norm(e, 1.0)
    assert rep.value == pytest.approx(ref, rel=1e-6)


def test_lp_odd_torus_against_known_profile():
    # f = cos(u)/sqrt(2 pi^2): ||f||_1 = (4/(2pi)) * 2pi / sqrt(2 pi^2) ... do 1D
    e = torus_eigenfunction(1, coefficients=[(1, 0, 1.0, 0.0), (0, 1, 0.0, 0.0)])
    c = 1 / math.sqrt(2 * math.pi ** 2)
    ref = (TWO_PI * c * 4.0)  # int |cos u| du = 4 over one period, times int dv
    rep = lp_norm(e, 1.0, rtol=1e-9)
    assert rep.value == pytest.approx(ref, rel=1e-8)


def test_lp_rejects_bad_p():
    with pytest.raises(UsageError):
        lp_norm(zonal(3), 0.5)
    with pytest.raises(UsageError):
        lp_norm(zonal(3), float("nan"))


def test_lp_convergence_error_carries_history():
    # the cross-line integral of |cos(5u)| has ten kinks, which cannot be
    # resolved to 1e-12 within a 60-subinterval budget
    ridge = torus_eigenfunction(25, coefficients=[
        (5, 0, 1.0, 0.0), (0, 5, 0.0, 0.0), (3, 4, 0.0, 0.0), (4, 3, 0.0, 0.0),
        (3, -4, 0.0, 0.0), (4, -3, 0.0, 0.0)])
    with pytest.raises(ConvergenceError) as exc:
        lp_norm(ridge, 1.0, rtol=1e-12, max_level=0)
    assert len(exc.value.history) >= 1
    assert exc.value.history[-1][1] > 0


@settings(deadline=None, max_examples=10)
@given(st.integers(0, 50))
def test_hoelder_l4_lower_bound(seed):
    # ||f||_2 <= ||f||_4 (4pi)^{1/4} for any unit-norm f
    e = random_harmonic(15, seed=seed)
    assert lp_norm(e, 4.0).value >= FOUR_PI ** -0.25 * (1 - 1e-9)


# ------------------------------------------------------------------- sup norm

def test_sup_zonal_is_pole_value():
    for k in (4, 25, 120):
        rep = sup_norm(zonal(k))
        assert rep.value == pytest.approx(math.sqrt((2 * k + 1) / FOUR_PI), rel=1e-9)


def test_sup_highest_weight_is_ck():
    for k in (8, 60):
        rep = sup_norm(highest_weight(k))
        assert rep.value == pytest.approx(highest_weight_constant(k), rel=1e-9)


def test_sup_torus_single_mode():
    e = torus_eigenfunction(1, coefficients=[(1, 0, 1.0, 0.0), (0, 1, 0.0, 0.0)])
    assert sup_norm(e).value == pytest.approx(1 / math.sqrt(2 * math.pi ** 2), rel=1e-10)


def test_sup_matches_large_lp_limit():
    e = random_harmonic(10, seed=7)
    s = sup_norm(e).value
    p40 = lp_norm(e, 40.0, rtol=1e-8).value
    assert p40 <= s * (1 + 1e-6)
    assert p40 >= 0.5 * s  # crude: ||f||_40 -> sup as p -> inf


# ---------------------------------------------------------------- restriction

def test_restriction_zonal_equator_constant():
    # P_4(0) = 3/8 on the whole equator
    e = zonal(4)
    eq = Geodesic.sphere_arc((0, 0, 1))
    rep = restriction_norm(e, eq, 2.0)
    assert rep.value == pytest.approx(math.sqrt(81.0 / 128.0), rel=1e-12)
    assert rep.meta["exact"]


def test_restriction_highest_weight_equator():
    k = 14
    rep = restriction_norm(highest_weight(k), Geodesic.sphere_arc((0, 0, 1)), 2.0)
    assert rep.value == pytest.approx(highest_weight_constant(k) * math.sqrt(math.pi),
                                      rel=1e-12)


def test_restriction_arc_vs_1d_quadrature():
    k = 9
    e = zonal(k)
    norm = math.sqrt((2 * k + 1) / FOUR_PI)
    # meridian arc through the pole: gamma(s) has colatitude |s - 1|... use
    # an arc with axis x-hat starting at the north pole: f = norm*P_k(cos s')
    g = Geodesic.sphere_arc((1, 0, 0), phase=0.0, length=1.5)
    zs = [float(g.point_at(s)[2]) for s in (0.0, 0.75)]
    ref = quad(lambda s: norm ** 2 * eval_legendre(k, float(g.point_at(s) @ np.array([0, 0, 1.0]))) ** 2,
               0.0, 1.5, limit=200)[0]
    rep = restriction_norm(e, g, 2.0)
    assert rep.value == pytest.approx(math.sqrt(ref), rel=1e-7)
    assert zs[0] != zs[1]  # the arc actually moves in colatitude


def test_restriction_sup_on_curve():
    e = zonal(6)
    g = Geodesic.sphere_arc((1, 0, 0))  # meridian circle through both poles
    rep = restriction_norm(e, g, math.inf)
    assert rep.value == pytest.approx(math.sqrt(13 / FOUR_PI), rel=1e-9)


def test_restriction_manifold_mismatch():
    with pytest.raises(UsageError):
        restriction_norm(torus_eigenfunction(1, seed=0), Geodesic.sphere_arc((0, 0, 1)))


def test_restriction_torus_closed_line():
    # f = cos(u)/sqrt(2 pi^2) restricted to the closed line v -> (0.3, v):
    # constant cos(0.3)/sqrt(2 pi^2), length 2pi
    e = torus_eigenfunction(1, coefficients=[(1, 0, 1.0, 0.0), (0, 1, 0.0, 0.0)])
    g = Geodesic.torus_segment((0.3, 0.0), (0, 1), length=TWO_PI)
    assert g.is_closed
    rep = restriction_norm(e, g, 2.0)
    ref = abs(math.cos(0.3)) / math.sqrt(2 * math.pi ** 2) * math.sqrt(TWO_PI)
    assert rep.value == pytest.approx(ref, rel=1e-10)


# ------------------------------------------------------------------ tube mass

def test_tube_mass_constant_recovers_volume():
    e = zonal(0)
    for tube in (
        Tube(Geodesic.sphere_arc((0, 0, 1)), 0.4),
        Tube(Geodesic.sphere_arc((0.6, 0, 0.8), phase=0.3, length=1.0), 0.15),
    ):
        rep = tube_mass(e, tube, rtol=1e-8)
        assert rep.value == pytest.approx(tube.volume() / FOUR_PI, rel=1e-8)


def test_tube_mass_constant_torus():
    e = torus_eigenfunction(0)
    tube = Tube(Geodesic.torus_segment((1.0, 2.0), (3, 4), length=1.2), 0.2)
    rep = tube_mass(e, tube, rtol=1e-8)
    assert rep.value == pytest.approx(tube.volume() / (FOUR_PI * math.pi), rel=1e-8)


def test_tube_mass_highest_weight_equator_band():
    # full equatorial tube: mass = pi c_k^2 int_{-w}^{w} cos^{2k+1} d dd
    k = 100
    e = highest_weight(k)
    lam = e.lam
    w = 1.0 / math.sqrt(lam)
    tube = Tube(Geodesic.sphere_arc((0, 0, 1)), w)
    c = highest_weight_constant(k)
    ref = math.pi * c * c * quad(lambda d: math.cos(d) ** (2 * k + 1), -w, w)[0]
    rep = tube_mass(e, tube, rtol=1e-6)
    assert rep.value == pytest.approx(ref, rel=1e-5)


def test_tube_mass_rejects_wide_sphere_tube():
    with pytest.raises(UsageError):
        tube_mass(zonal(4), Tube(Geodesic.sphere_arc((0, 0, 1)), 2.0))


# ------------------------------------------------------------------ ball mass

def test_ball_mass_constant_recovers_area():
    e = zonal(0)
    for r in (0.2, 0.8):
        rep = ball_mass(e, (0, 0, 1), r, rtol=1e-9)
        assert rep.value == pytest.approx(TWO_PI * (1 - math.cos(r)) / FOUR_PI, rel=1e-9)
    et = torus_eigenfunction(0)
    rep = ball_mass(et, (1.0, 1.0), 0.5, rtol=1e-9)
    assert rep.value == pytest.approx(math.pi * 0.25 / (FOUR_PI * math.pi), rel=1e-9)


def test_ball_mass_zonal_pole_vs_1d():
    k = 30
    e = zonal(k)
    r = 0.3
    norm2 = (2 * k + 1) / FOUR_PI
    ref = TWO_PI * norm2 * quad(
        lambda t: eval_legendre(k, math.cos(t)) ** 2 * math.sin(t), 0, r, limit=200)[0]
    rep = ball_mass(e, (0, 0, 1), r, rtol=1e-8)
    assert rep.value == pytest.approx(ref, rel=1e-7)


def test_ball_mass_validation():
    with pytest.raises(UsageError):
        ball_mass(zonal(3), (0, 0, 1), -0.1)
    with pytest.raises(UsageError):
        ball_mass(zonal(3), (0.0, 0.0), 0.3)


# ------------------------------------------------------------------ KN search

def test_kn_highest_weight_finds_equator():
    k = 20
    e = highest_weight(k)
    lam = e.lam
    w = 1.0 / math.sqrt(lam)
    res = kn_norm(e, length=1.0)
    assert abs(float(np.dot(res.argmax.axis, [0, 0, 1]))) > 0.999
    # oracle: unit window centered on a peak of cos^2(k phi), plus end caps
    c = highest_weight_constant(k)
    iw = quad(lambda d: math.cos(d) ** (2 * k + 1), -w, w)[0]
    rect = c * c * iw * (0.5 + math.sin(k * 1.0) / (2 * k))
    lower = rect  # caps only add mass
    upper = rect + 2 * c * c * (0.5 + 1 / (2 * k)) * w * 2 * w  # crude cap bound
    assert lower * (1 - 5e-3) <= res.value ** 2 <= upper * (1 + 5e-3)
    assert res.family_size > 100
    assert res.gap_estimate > 0


def test_kn_closed_highest_weight_equator_band():
    k = 30
    e = highest_weight(k)
    w = 1.0 / math.sqrt(e.lam)
    res = kn_norm(e, closed=True)
    c = highest_weight_constant(k)
    ref = math.pi * c * c * quad(lambda d: math.cos(d) ** (2 * k + 1), -w, w)[0]
    assert res.value ** 2 == pytest.approx(ref, rel=2e-3)
    assert abs(float(np.dot(res.argmax.axis, [0, 0, 1]))) > 0.999


def test_kn_constant_function_flat():
    e = zonal(0)
    res = kn_norm(e, width=0.1, length=1.0)
    tube = Tube(Geodesic.sphere_arc((0, 0, 1), length=1.0), 0.1)
    assert res.value ** 2 == pytest.approx(tube.volume() / FOUR_PI, rel=1e-3)


def test_kn_torus_single_mode():
    # f = cos(u)/sqrt(2 pi^2): best unit tube runs along a ridge u = 0 (say),
    # direction (0, 1); mass = int_{-w}^{w} cos^2(u) du / (2 pi^2) * length
    e = torus_eigenfunction(1, coefficients=[(1, 0, 1.0, 0.0), (0, 1, 0.0, 0.0)])
    res = kn_norm(e, width=0.25, length=1.0, density_factor=1.0)
    w = 0.25
    rect = quad(lambda u: math.cos(u) ** 2, -w, w)[0] / (2 * math.pi ** 2)
    # caps: two half-disks at the segment ends, also centered on the ridge
    cap = quad(lambda rho: rho * quad(
        lambda psi: math.cos(rho * math.cos(psi)) ** 2, -math.pi / 2, math.pi / 2)[0],
        0, w)[0] / (2 * math.pi ** 2)
    ref = rect + 2 * cap
    assert res.value ** 2 == pytest.approx(ref, rel=5e-3)
    d = res.argmax.direction
    assert abs(abs(float(d[1])) - 1.0) < 1e-6  # runs along v


# --------------------------------------------------------- sup of restrictions

def test_sup_restriction_highest_weight_window():
    k = 30
    e = highest_weight(k)
    res = sup_restriction_norm(e, length=1.0)
    c = highest_weight_constant(k)
    best_window = 0.5 + abs(math.sin(k * 1.0)) / (2 * k)
    assert res.value == pytest.approx(c * math.sqrt(best_window), rel=1e-3)
    assert abs(float(np.dot(res.argmax.axis, [0, 0, 1]))) > 0.999


def test_sup_restriction_closed_zonal_meridian():
    k = 25
    e = zonal(k)
    res = sup_restriction_norm(e, closed=True)
    norm2 = (2 * k + 1) / FOUR_PI
    meridian = norm2 * quad(lambda s: eval_legendre(k, math.cos(s)) ** 2, 0, TWO_PI,
                            limit=400)[0]
    assert res.value ** 2 >= meridian * (1 - 1e-6)
    assert res.value ** 2 <= meridian * 1.25


# -------------------------------------------------------------- sup ball mass

def test_sup_ball_constant():
    e = zonal(0)
    res = sup_ball_mass(e, 0.4)
    assert res.value == pytest.approx(TWO_PI * (1 - math.cos(0.4)) / FOUR_PI, rel=1e-6)


def test_sup_ball_zonal_near_pole():
    # the best center must do at least as well as the pole itself, and stays
    # within one radius of it (off-center balls can align more bright rings,
    # so the pole need not be the exact argmax)
    k = 40
    e = zonal(k)
    r = 1.0 / e.lam ** 0.5
    res = sup_ball_mass(e, r)
    direct = ball_mass(e, (0, 0, 1), r, rtol=1e-8).value
    assert res.value >= direct * (1 - 1e-4)
    assert res.value <= direct * 1.5
    assert math.acos(min(abs(res.argmax[2]), 1.0)) < r


def test_sup_ball_torus():
    e = torus_eigenfunction(1, coefficients=[(1, 0, 1.0, 0.0), (0, 1, 0.0, 0.0)])
    r = 0.5
    res = sup_ball_mass(e, r)
    # centered anywhere on the ridge u=0 (or u=pi): mass is the same
    ref = ball_mass(e, (0.0, 1.0), r, rtol=1e-8).value
    assert res.value == pytest.approx(ref, rel=1e-4)
