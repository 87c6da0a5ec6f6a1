"""Piecewise-affine nested construction: profile, walker, edges, ladders."""
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamflow import cascade, construction as cn

depths = st.integers(min_value=2, max_value=30)


# --- profile field ------------------------------------------------------------

def test_build_field_validates_depth():
    with pytest.raises(ValueError):
        cn.build_field(0)


def test_profile_is_ambient_outside_root():
    f = cn.build_field(3)
    for x, y in [(-1.0, 0.8), (2.0, -0.5), (0.1, 0.9), (0.5, 1.5)]:
        assert f.value(x, y) == y
        assert f.gradient(x, y) == (0.0, 1.0)


def test_sup_gradient_uniform_in_depth():
    # the Lipschitz bound of the profile is attained at generation 1 and
    # does not grow as deeper generations are added
    pin = 2.3864651787492557
    for d in (1, 2, 3):
        assert cn.build_field(d).sup_gradient_norm() == pin


def test_min_vertical_slope_is_deepest_slow_speed():
    for d in (1, 2, 3):
        assert cn.build_field(d).min_vertical_slope() == cascade.slow_speed(d)
    assert cn.build_field(2).min_vertical_slope() == Fraction(9, 26)


def test_fan_slopes():
    assert [cn.fan_level_slope(n) for n in (1, 2, 3, 4)] == \
        [Fraction(5, 6), Fraction(4, 5), Fraction(5, 7), Fraction(23, 27)]


def test_fan_slope_norm_tail_summable():
    vals = [float(cn.fast_slope_norm(n)) for n in range(2, 27)]
    assert all(vals[i + 1] < vals[i] for i in range(4, len(vals) - 1))
    assert vals[-1] < 1e-4


# --- exact walker vs exact tracer ------------------------------------------------

@pytest.mark.parametrize("depth", [1, 2, 3])
@pytest.mark.parametrize("kind", ["fast", "slow"])
def test_walker_matches_exact_tracer_on_witnesses(depth, kind):
    # depths must match: a shallow witness can sit exactly on a seam level
    # of a deeper generation, where T(y) genuinely jumps
    f = cn.build_field(depth)
    heights = cn.all_witness_heights(depth, kind)
    assert len(heights) == 2 ** (depth - 1)
    for y in heights:
        segs = cn.walk_strip(f, float(y), 0.0, 1.0)
        t_walk = cn.walk_time(segs, 0.0, 1.0)
        t_exact = float(cn.strip_time_exact(y, depth))
        assert abs(t_walk - t_exact) < 1e-11


def test_walker_matches_tracer_at_random_heights():
    f6 = cn.build_field(6)
    rng = random.Random(7)
    for _ in range(120):
        y = rng.uniform(0.0, 0.5)
        t_walk = cn.walk_time(cn.walk_strip(f6, y, 0.0, 1.0), 0.0, 1.0)
        t_exact = float(cn.strip_time_exact(Fraction(y).limit_denominator(10 ** 12), 6))
        assert abs(t_walk - t_exact) < 1e-9


def test_unit_transit_above_construction():
    for depth in (1, 4):
        assert cn.strip_time_exact(Fraction(9, 10), depth) == 1
    assert cn.walk_time(cn.walk_strip(cn.build_field(2), 0.9, 0.0, 1.0),
                        0.0, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_strip_time_pin():
    # fast witness of the depth-3 field
    assert cn.strip_time_exact(Fraction(63, 512), 3) == Fraction(122503, 103680)


# --- flow_point --------------------------------------------------------------------

def test_flow_point_identity_and_exit():
    f = cn.build_field(6)
    assert cn.flow_point(f, 0.3, 0.27, 0.0) == (0.3, 0.27, cn.FLOW_OK)
    x1, y1, flag = cn.flow_point(f, 2.5, 0.27, 10.0)
    assert flag == cn.FLOW_EXITED
    assert x1 == f.domain.x_hi


def test_flow_point_conserves_profile():
    f = cn.build_field(6)
    rng = random.Random(11)
    for _ in range(200):
        y = rng.uniform(0.0, 0.5)
        x0 = rng.uniform(-0.5, 0.9)
        x1, y1, flag = cn.flow_point(f, x0, y, rng.uniform(0.0, 2.0))
        assert flag in (cn.FLOW_OK, cn.FLOW_EXITED)
        assert abs(f.value(x1, y1) - f.value(x0, y)) < 1e-10


def test_flow_point_time_consistency():
    # flowing for exactly the crossing time of [0, 1] lands on x = 1
    f = cn.build_field(6)
    rng = random.Random(13)
    for _ in range(60):
        y = rng.uniform(0.0, 0.5)
        T = cn.walk_time(cn.walk_strip(f, y, 0.0, 1.0), 0.0, 1.0)
        x1, _, _ = cn.flow_point(f, 0.0, y, T)
        assert abs(x1 - 1.0) < 1e-9


# --- jump edges ---------------------------------------------------------------------

@pytest.mark.parametrize("depth", [1, 2, 3])
def test_jump_edge_count(depth):
    edges = cn.jump_edges(cn.build_field(depth))
    assert len(edges) == 44 * (2 ** depth - 1)


def test_generation_edge_counts_and_mass():
    masses = []
    for n in (1, 2, 3):
        gen = cn.generation_jump_edges(n)
        assert len(gen) == 44 * 2 ** (n - 1)
        masses.append(sum(e.mass for e in gen))
    assert masses[0] == pytest.approx(4.440972222222221, rel=1e-12)
    assert masses[1] == pytest.approx(0.5269658119658116, rel=1e-12)
    assert masses[2] == pytest.approx(0.1447165404623386, rel=1e-12)
    assert masses[0] > masses[1] > masses[2]


def test_edge_endpoint_values_and_jumps():
    f = cn.build_field(3)
    eps = 1e-9
    for e in cn.jump_edges(f):
        for (px, py), fv in ((e.p0, e.f0), (e.p1, e.f1)):
            qx = min(max(px, f.domain.x_lo), f.domain.x_hi - 1e-12)
            qy = min(max(py, f.domain.y_lo), f.domain.y_hi - 1e-12)
            assert abs(f.value(qx, qy) - fv) < 1e-12
        # measured gradient jump across the edge midpoint matches the record
        mx, my = (e.p0[0] + e.p1[0]) / 2, (e.p0[1] + e.p1[1]) / 2
        gp = f.gradient(mx + eps * e.nu[0], my + eps * e.nu[1])
        gm = f.gradient(mx - eps * e.nu[0], my - eps * e.nu[1])
        err = math.hypot(gp[0] - gm[0] - e.delta[0], gp[1] - gm[1] - e.delta[1])
        assert err < 1e-7


def test_no_unenumerated_jumps():
    # probe random points away from every recorded edge: the gradient must
    # be locally constant there
    f2 = cn.build_field(2)
    edges = cn.jump_edges(f2)
    P0 = np.array([e.p0 for e in edges])
    P1 = np.array([e.p1 for e in edges])
    D = P1 - P0
    L2 = (D ** 2).sum(axis=1)

    def edge_dist(x, y):
        t = ((x - P0[:, 0]) * D[:, 0] + (y - P0[:, 1]) * D[:, 1]) / L2
        t = np.clip(t, 0.0, 1.0)
        return float(np.hypot(P0[:, 0] + t * D[:, 0] - x,
                              P0[:, 1] + t * D[:, 1] - y).min())

    rng = random.Random(3)
    for _ in range(8000):
        x = rng.uniform(0.2, 0.8)
        y = rng.uniform(-0.05, 0.55)
        if edge_dist(x, y) < 2e-4:
            continue
        g0 = f2.gradient(x, y)
        for dx, dy in ((1e-5, 0), (-1e-5, 0), (0, 1e-5), (0, -1e-5)):
            g1 = f2.gradient(x + dx, y + dy)
            assert abs(g0[0] - g1[0]) + abs(g0[1] - g1[1]) < 1e-9


def test_critical_levels_sorted():
    levs = cn.critical_levels(2)
    assert len(levs) == 21
    assert levs[0] == -0.5 and levs[-1] == 0.0
    assert all(levs[i] < levs[i + 1] for i in range(len(levs) - 1))


# --- analytic ladder -----------------------------------------------------------------

def test_ladder_pins():
    lad = cn.crossing_ladder(8)
    assert lad.method == "analytic"
    assert lad.T1[:3] == (Fraction(1, 2), Fraction(1, 8), Fraction(13, 324))
    assert lad.as_rows()[0] == (1, Fraction(1, 2), Fraction(45, 64),
                                Fraction(287, 704), Fraction(77, 64),
                                Fraction(1, 4))


@given(n=depths)
def test_entry_time_identity(n):
    # T1[n] * v[n-1] = c[n] exactly
    lad = cn.crossing_ladder(n)
    assert lad.T1[n - 1] * cascade.slow_speed(n - 1) == cascade.component_side(n)


def test_ladder_assembly_recurrence():
    # increment form of the crossing-time assembly:
    # T[n] - T[n-1] = Ts[n-1] - Tf[n-1] + Tf[n] - T1[n]
    lad = cn.crossing_ladder(12)
    for n in range(3, 13):
        i = n - 1
        want = lad.Ts[i - 1] - lad.Tf[i - 1] + lad.Tf[i] - lad.T1[i]
        assert lad.T[i] - lad.T[i - 1] == want


def test_ladder_monotone_bounded():
    # monotone from generation 2 on; the generation-1 entry is larger
    # because its rebudgeted channels make the first fast path slow
    lad = cn.crossing_ladder(25)
    assert all(lad.T[i] < lad.T[i + 1] for i in range(1, 24))
    assert lad.T[0] > lad.T[1]
    assert all(t < Fraction(13, 10) for t in lad.T)
    assert lad.sigma_partials[0] == Fraction(1, 4)
    for n in range(2, 10):
        assert lad.sigma_partials[n - 1] == cascade.sigma(n + 1)


def test_tv_level_bound_matches_ladder():
    lad = cn.crossing_ladder(12)
    for n in range(3, 12):
        want = 2 ** (n - 1) * (lad.T[n - 1] - lad.T[n - 2])
        assert cn.tv_level_bound(n) == want
    assert float(cn.tv_level_bound(8)) == 0.10401407383313183
    with pytest.raises(ValueError):
        cn.tv_level_bound(2)


# --- measured total variation ---------------------------------------------------------

def test_tv_profile_pins():
    prof = cn.tv_profile(5, 128)
    assert prof.depth == 5
    assert prof.fully_resolved
    assert prof.measured_tv == 2.125418329307237
    assert prof.level_bounds == {3: 0.16279792524005487,
                                 4: 0.08879598229595335,
                                 5: 0.07497047319387289}
    assert all(prof.measured_tv >= b for b in prof.level_bounds.values())
    assert prof.sample_count >= 128
    assert prof.sup_T > 1.2


def test_tv_profile_bounds_hold_at_depth_4():
    prof = cn.tv_profile(4, 1024)
    assert sorted(prof.level_bounds) == [3, 4]
    assert all(prof.measured_tv >= b for b in prof.level_bounds.values())
    assert prof.fully_resolved


def test_tv_profile_rejects_shallow_depth():
    with pytest.raises(ValueError):
        cn.tv_profile(2, 64)


# --- witness bookkeeping ----------------------------------------------------------------

def test_witness_fractions_nested():
    ys = cn.witness_fractions((0, 0), "fast")
    assert all(0 < y < Fraction(1, 2) for y in ys)
    h = cn.witness_height((0, 1), "slow")
    assert 0 < h < Fraction(1, 2)
    with pytest.raises(ValueError):
        cn.witness_fractions((0,), "sideways")


def test_all_witness_heights_distinct():
    hs = cn.all_witness_heights(4, "fast") + cn.all_witness_heights(4, "slow")
    assert len(set(hs)) == len(hs)
