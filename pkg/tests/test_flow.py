"""Flow computation: level-set route against the adaptive ODE oracle."""
import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hamflow import construction, flow, hamiltonian
from hamflow.fields import (AnalyticScalarField, rotation_field, shear_field,
                            translation_field)
from hamflow.geometry import AxisRect, Point

ROT = rotation_field()


# --- point flows on analytic fields -------------------------------------------

def test_quarter_turn_both_routes():
    z0 = Point(1.0, 0.0)
    t = math.pi / 2
    p_rk = flow.rk_flow(ROT, z0, t, tol=1e-11)
    assert math.hypot(p_rk.x, p_rk.y - 1.0) < 1e-8
    p_ls = flow.levelset_flow(ROT.stream, ROT, z0, t)
    assert math.hypot(p_ls.x, p_ls.y - 1.0) < 1e-9


def test_identity_at_t0():
    z0 = Point(1.0, 0.0)
    assert flow.rk_flow(ROT, z0, 0.0) == z0
    assert flow.levelset_flow(ROT.stream, ROT, z0, 0.0) == z0


def test_unit_speed_translation():
    b = translation_field()
    p = flow.levelset_flow(b.stream, b, Point(0.0, 0.0), 0.7)
    assert (p.x, p.y) == pytest.approx((0.7, 0.0), abs=1e-12)


def test_semigroup_property():
    z0 = Point(1.0, 0.0)
    t1, t2 = 0.4, 0.9
    a = flow.rk_flow(ROT, flow.rk_flow(ROT, z0, t1, tol=1e-11), t2, tol=1e-11)
    c = flow.rk_flow(ROT, z0, t1 + t2, tol=1e-11)
    assert math.hypot(a.x - c.x, a.y - c.y) < 1e-8
    a = flow.levelset_flow(ROT.stream, ROT,
                           flow.levelset_flow(ROT.stream, ROT, z0, t1), t2)
    c = flow.levelset_flow(ROT.stream, ROT, z0, t1 + t2)
    assert math.hypot(a.x - c.x, a.y - c.y) < 1e-9


def test_hamiltonian_conservation():
    H = ROT.stream
    worst_rk = worst_ls = 0.0
    for zx, zy, tt in [(0.9, 0.3, 1.3), (-0.5, 0.8, 2.6), (0.2, -1.1, 0.77)]:
        h0 = H.value(zx, zy)
        q = flow.rk_flow(ROT, Point(zx, zy), tt, tol=1e-11)
        worst_rk = max(worst_rk, abs(H.value(q.x, q.y) - h0))
        q = flow.levelset_flow(H, ROT, Point(zx, zy), tt)
        worst_ls = max(worst_ls, abs(H.value(q.x, q.y) - h0))
    assert worst_rk < 1e-8
    assert worst_ls < 1e-12


def test_rotation_angle_oracle():
    r0 = math.hypot(0.9, 0.3)
    th0 = math.atan2(0.3, 0.9)
    for tt in (0.3, 1.1, 2.0, 4.5):
        q = flow.levelset_flow(ROT.stream, ROT, Point(0.9, 0.3), tt)
        assert math.hypot(q.x - r0 * math.cos(th0 + tt),
                          q.y - r0 * math.sin(th0 + tt)) < 1e-9


def test_speed_bound():
    for tt in (0.5, 1.5, 3.0):
        q = flow.levelset_flow(ROT.stream, ROT, Point(0.9, 0.3), tt)
        assert math.hypot(q.x - 0.9, q.y - 0.3) <= ROT.sup_norm * tt + 1e-9


def test_shear_closed_form():
    b = shear_field()
    y0 = 0.6
    want_x = -1.0 + (1 + y0 * y0) * 1.7
    q = flow.rk_flow(b, Point(-1.0, y0), 1.7)
    assert abs(q.x - want_x) < 1e-8 and abs(q.y - y0) < 1e-12
    q = flow.levelset_flow(b.stream, b, Point(-1.0, y0), 1.7)
    assert abs(q.x - want_x) < 1e-8 and abs(q.y - y0) < 1e-10


# --- domain exits ---------------------------------------------------------------

def test_exit_flags_translation():
    b = translation_field()
    out = flow.rk_flow_ex(b, Point(0.0, 0.0), 10.0)
    assert out.flag == "exited"
    assert out.t_reached == pytest.approx(3.0, abs=1e-6)
    out = flow.levelset_flow_ex(b.stream, b, Point(0.0, 0.0), 10.0)
    assert out.flag == "exited"
    assert out.t_reached == pytest.approx(3.0, abs=1e-6)
    assert out.point.x == pytest.approx(3.0, abs=1e-6)
    out = flow.levelset_flow_ex(b.stream, b, Point(0.0, 0.0), 2.5)
    assert out.flag == "ok" and out.point.x == pytest.approx(2.5, abs=1e-9)


# --- time_along_level -------------------------------------------------------------

def test_time_along_level_constant_speed():
    H = AnalyticScalarField(lambda x, y: -2.0 * y + 0.0 * x,
                            lambda x, y: (0.0 * x, -2.0 + 0.0 * y),
                            AxisRect(-0.5, 1.5, -0.5, 0.5), lipschitz_bound=2.0)
    from hamflow.fields import PlanarField
    b = PlanarField(stream=H, sup_norm=2.0)
    curve = hamiltonian.level_curve(H, -0.5, b.domain, e=(1.0, 0.0), delta=1.0)
    tau = flow.time_along_level(curve, b, 0.0, 1.0)
    assert tau == pytest.approx(0.5, abs=1e-12)


def test_time_along_level_growing_speed():
    # b = (1 + x, -y): crossing [0, 1] along y = 0 takes log 2
    H = AnalyticScalarField(lambda x, y: -y * (1.0 + x),
                            lambda x, y: (-y + 0.0 * x, -(1.0 + x)),
                            AxisRect(-0.5, 1.5, -0.5, 0.5), lipschitz_bound=3.0)
    from hamflow.fields import PlanarField
    b = PlanarField(stream=H, sup_norm=3.0)
    curve = hamiltonian.level_curve(H, 0.0, AxisRect(-0.1, 1.1, -0.3, 0.3),
                                    e=(1.0, 0.0), delta=0.5)
    tau = flow.time_along_level(curve, b, 0.0, 1.0)
    assert tau == pytest.approx(math.log(2.0), abs=1e-10)


def test_time_along_level_arc_and_sign():
    win = AxisRect(-0.55, 0.55, -1.4, -0.6)
    curve = hamiltonian.level_curve(ROT.stream, 0.5, win, e=(1.0, 0.0),
                                    x_resolution=0.55 * 2 / 4096)
    tau = flow.time_along_level(curve, ROT, -0.3, 0.4)
    exact = math.acos(-0.3) - math.acos(0.4)
    assert tau == pytest.approx(exact, abs=1e-7)
    assert flow.time_along_level(curve, ROT, 0.4, -0.3) == pytest.approx(-tau, abs=1e-12)


# --- batch and maps -----------------------------------------------------------------

def test_rk_batch_matches_scalar():
    pts = np.array([[1.0, 0.0], [0.5, 0.5], [-0.8, 0.1], [0.0, -1.2]])
    img, flags = flow.rk_flow_many(ROT, pts, 0.9, tol=1e-9)
    assert (flags == 0).all()
    for i in range(len(pts)):
        q = flow.rk_flow(ROT, Point(*pts[i]), 0.9, tol=1e-9)
        assert img[i, 0] == q.x and img[i, 1] == q.y


def test_flow_map_identity():
    win = AxisRect(-1.0, 1.0, -1.0, 1.0)
    fm = flow.flow_map(ROT, ROT.stream, 0.0, win, 8, method="rk")
    assert (fm.flags == flow.MAP_OK).all()
    xs = np.linspace(-1.0, 1.0, 9)
    gx, gy = np.meshgrid(xs, xs)
    assert_allclose(fm.images[..., 0], gx, atol=0)
    assert_allclose(fm.images[..., 1], gy, atol=0)


def test_flow_map_rotation_and_density():
    win = AxisRect(-1.0, 1.0, -1.0, 1.0)
    fm_rk = flow.flow_map(ROT, ROT.stream, 0.7, win, 32, method="rk", tol=1e-10)
    rep = flow.compressibility_check(fm_rk)
    assert rep.excluded == 0
    assert rep.max_ratio == pytest.approx(1.0, abs=1e-5)
    assert rep.min_ratio == pytest.approx(1.0, abs=1e-5)

    fm_ls = flow.flow_map(ROT, ROT.stream, 0.7, win, 8, method="levelset")
    # the origin is the one degenerate start (b = 0 there)
    errors = int((fm_ls.flags == flow.MAP_ERROR).sum())
    assert errors <= 1
    ok = fm_ls.flags == flow.MAP_OK
    d = np.hypot(*(fm_ls.images - fm_rk.images[::4, ::4]).transpose(2, 0, 1))
    assert d[ok].max() < 1e-6


def test_flow_map_csv_rows():
    win = AxisRect(-1.0, 1.0, -1.0, 1.0)
    fm = flow.flow_map(ROT, ROT.stream, 0.0, win, 4, method="rk")
    rows = list(fm.csv_rows())
    assert len(rows) == 25
    assert len(rows[0]) == 7


def test_translation_density_exact():
    b = translation_field()
    win = AxisRect(0.0, 1.0, 0.0, 1.0)
    fm = flow.flow_map(b, b.stream, 0.5, win, 8, method="rk", tol=1e-10)
    rep = flow.compressibility_check(fm)
    assert rep.max_ratio == pytest.approx(1.0, abs=1e-12)
    assert rep.min_ratio == pytest.approx(1.0, abs=1e-12)


# --- cascade-backed flows --------------------------------------------------------

def test_cascade_inner_detection():
    b = construction.build_velocity(3)
    inner = construction.cascade_inner(b)
    assert inner is not None and inner.depth == 3
    assert construction.cascade_inner(ROT) is None


def test_cascade_crossing_times():
    b = construction.build_velocity(3)
    y = float(Fraction(63, 512))
    T_exact = construction.strip_time_exact(Fraction(63, 512), 3)
    ct = flow.crossing_times(b, [y])[0]
    assert ct.t_enter == pytest.approx(1.0, abs=1e-12)
    assert ct.transit == pytest.approx(float(T_exact), abs=1e-9)
    assert ct.t_exit == ct.t_enter + ct.transit


def test_crossing_times_rejects_analytic_fields():
    with pytest.raises(ValueError):
        flow.crossing_times(ROT, [0.0])


def test_cascade_levelset_legs():
    b = construction.build_velocity(3)
    y = float(Fraction(63, 512))
    T = float(construction.strip_time_exact(Fraction(63, 512), 3))
    out = flow.levelset_flow_ex(b.stream, b, Point(-1.0, y), 1.0)
    assert out.flag == "ok"
    assert (out.point.x, out.point.y) == pytest.approx((0.0, y), abs=1e-12)
    # legs: 1 to reach the strip, T across it, 2 more to the domain edge
    out = flow.levelset_flow_ex(b.stream, b, Point(-1.0, y), 10.0)
    assert out.flag == "exited"
    assert out.point.x == pytest.approx(3.0, abs=1e-12)
    assert out.t_reached == pytest.approx(3.0 + T, abs=1e-9)
    assert out.uncertainty == pytest.approx(b.sup_norm * (10.0 - out.t_reached),
                                            abs=1e-9)


def test_cascade_flow_conserves_profile():
    b = construction.build_velocity(3)
    inner = construction.cascade_inner(b)
    rng = np.random.default_rng(7)
    worst = 0.0
    tried = 0
    from hamflow.errors import ResolutionError
    for _ in range(120):
        yy = float(rng.uniform(0.005, 0.495))
        x0 = float(rng.uniform(-1.0, 0.5))
        tt = float(rng.uniform(0.0, 2.0))
        try:
            o = flow.levelset_flow_ex(b.stream, b, Point(x0, yy), tt)
        except ResolutionError:
            continue
        if o.flag != "ok":
            continue
        tried += 1
        worst = max(worst, abs(inner.value(o.point.x, o.point.y)
                               - inner.value(x0, yy)))
    assert tried > 50
    assert worst < 1e-10


def test_cascade_rk_agreement():
    b = construction.build_velocity(3)
    # ambient region: unit rightward speed
    q = flow.rk_flow(b, Point(-0.9, 0.7), 1.2, tol=1e-10)
    assert abs(q.x - 0.3) < 1e-9 and abs(q.y - 0.7) < 1e-12
    # through the construction: adaptive oracle tracks the walker
    o_walk = flow.levelset_flow_ex(b.stream, b, Point(-0.5, 0.31), 1.7)
    o_rk = flow.rk_flow_ex(b, Point(-0.5, 0.31), 1.7, tol=1e-11, max_step=1e-3)
    assert o_walk.flag == "ok"
    d = math.hypot(o_walk.point.x - o_rk.point.x, o_walk.point.y - o_rk.point.y)
    assert d < 2e-3
