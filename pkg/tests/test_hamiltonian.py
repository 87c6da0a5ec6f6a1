import math

import numpy as np
import pytest

from hamflow import construction, hamiltonian
from hamflow.errors import DivergenceError, DomainError, TransversalityError
from hamflow.fields import (PlanarField, rotation_field, shear_field,
                            translation_field)
from hamflow.geometry import AxisRect, Point


# --- streamfunction reconstruction -------------------------------------------

def test_streamfunction_translation():
    H = hamiltonian.streamfunction(translation_field())
    assert H.value(0.3, 0.7) == pytest.approx(-0.7, abs=1e-12)
    assert H.value(2.0, 0.7) == pytest.approx(-0.7, abs=1e-12)


def test_streamfunction_rotation():
    H = hamiltonian.streamfunction(rotation_field())
    assert H.value(1.0, 1.0) == pytest.approx(1.0, abs=1e-10)
    assert H.value(0.0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_streamfunction_base_anchors_constant():
    # H is only defined up to a constant; the base point pins it
    H = hamiltonian.streamfunction(shear_field(), base=Point(0.5, 0.0))
    assert H.value(2.0, 1.0) == pytest.approx(-(1.0 + 1.0 / 3.0), abs=1e-9)
    assert H.value(-1.0, 0.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        hamiltonian.streamfunction(shear_field(), base=Point(99.0, 0.0))


def test_streamfunction_rejects_divergent_field():
    bad = PlanarField(components=(lambda x, y: x, lambda x, y: 0.0 * x),
                      domain=AxisRect(-1.0, 1.0, -1.0, 1.0), sup_norm=2.0,
                      name="sink")
    with pytest.raises(DivergenceError) as exc:
        hamiltonian.streamfunction(bad)
    # residual is the circulation defect of one screening cell: div b times
    # the cell area, here 1 * (2/8)^2
    assert exc.value.residual == pytest.approx(0.0625, rel=1e-9)
    cell = exc.value.cell.as_tuple()
    assert len(cell) == 4


# --- level_curve ----------------------------------------------------------------

def test_level_curve_horizontal_line():
    H = translation_field().stream
    win = AxisRect(-1.0, 2.0, -1.0, 1.0)
    c = hamiltonian.level_curve(H, -0.3, win, e=(1.0, 0.0), delta=1.0,
                                x_resolution=1 / 64)
    assert np.abs(c.points[:, 1] - 0.3).max() < 1e-12
    assert c.graph_lipschitz_L == 0.0
    assert (c.o_lo, c.o_hi) == (-1.0, 2.0)


def test_level_curve_arc():
    H = rotation_field().stream
    win = AxisRect(0.5, 1.5, -0.5, 0.5)
    c = hamiltonian.level_curve(H, 0.5, win, e=(0.0, 1.0), delta=0.4,
                                x_resolution=1 / 128)
    radii = np.hypot(c.points[:, 0], c.points[:, 1])
    assert np.abs(radii - 1.0).max() < 1e-12
    resid = np.abs(H.value_many(c.points[:, 0], c.points[:, 1]) - 0.5).max()
    assert resid < 1e-12
    # graph slope |dy/dx| on the arc is bounded by the window's worst angle
    assert 0.0 < c.graph_lipschitz_L < 0.6
    mid = c.point_at(0.5 * (c.o_lo + c.o_hi))
    assert H.value(mid.x, mid.y) == pytest.approx(0.5, abs=1e-12)


def test_level_curve_point_at_bounds():
    H = translation_field().stream
    win = AxisRect(-1.0, 2.0, -1.0, 1.0)
    c = hamiltonian.level_curve(H, -0.3, win, e=(1.0, 0.0))
    with pytest.raises(DomainError):
        c.point_at(c.o_hi + 0.5)


def test_level_curve_transversality_failures():
    H = rotation_field().stream
    # circle doubles back inside a window straddling the turning point
    with pytest.raises(TransversalityError):
        hamiltonian.level_curve(H, 0.5, AxisRect(-1.5, 1.5, 0.1, 1.5),
                                e=(1.0, 0.0))
    # delta larger than the actual directional speed on the window
    with pytest.raises(TransversalityError):
        hamiltonian.level_curve(H, 0.5, AxisRect(0.5, 1.5, -0.5, 0.5),
                                e=(0.0, 1.0), delta=1.2)


def test_level_curve_unattained_level():
    H = translation_field().stream
    with pytest.raises(DomainError):
        hamiltonian.level_curve(H, 5.0, AxisRect(-1.0, 2.0, -1.0, 1.0))


def test_level_curve_cascade_level():
    b = construction.build_velocity(2)
    inner = construction.cascade_inner(b)
    h = -0.125  # regular level through the root blocks
    c = hamiltonian.level_curve(b.stream, h, AxisRect(0.0, 1.0, -0.5, 1.0),
                                e=(1.0, 0.0),
                                delta=float(inner.min_vertical_slope()),
                                x_resolution=1 / 512)
    resid = np.abs(b.stream.value_many(c.points[:, 0], c.points[:, 1]) - h).max()
    assert resid < 1e-12
    assert c.graph_lipschitz_L <= float(inner.sup_gradient_norm())


# --- regular_decomposition --------------------------------------------------------

def test_decomposition_translation():
    b = translation_field()
    dec = hamiltonian.regular_decomposition(b.stream, b,
                                            AxisRect(-0.5, 1.5, -0.9, 0.9),
                                            k_max=4, h_resolution=0.25)
    assert dec.critical_values == ()
    assert dec.e == (1.0, 0.0)
    # |b| = 1 everywhere: every level lands in the same k-class
    assert {r.k for r in dec.records} == {2}
    assert all(r.min_b == pytest.approx(1.0, abs=1e-9) for r in dec.records)


def test_decomposition_rotation_annulus():
    b = rotation_field()
    win = AxisRect(0.5, 1.5, -0.5, 0.5)
    dec = hamiltonian.regular_decomposition(b.stream, b, win, k_max=6,
                                            h_resolution=0.1)
    # on the level h, speed = radius = sqrt(2 h)
    worst = max(abs(r.min_b - math.sqrt(2 * r.h)) for r in dec.records)
    assert worst < 1e-9
    assert len(dec.omega(2)) > 0
    assert all(r.min_b > 0.5 for r in dec.records)


def test_decomposition_cascade_window():
    b = construction.build_velocity(2)
    dec = hamiltonian.regular_decomposition(b.stream, b,
                                            AxisRect(0.05, 0.95, 0.0, 0.5),
                                            k_max=8, h_resolution=0.05,
                                            x_resolution=1 / 256)
    assert len(dec.records) > 10
    mins = sorted({round(r.min_b, 5) for r in dec.records})
    # the three speeds present at depth 2: slow v2, slow v1, ambient 1
    assert mins[0] == pytest.approx(float(construction.build_field(2)
                                          .min_vertical_slope()), abs=1e-5)
    assert mins[-1] == pytest.approx(1.0, abs=1e-9)
    doc = dec.to_json_dict()
    assert sorted(doc.keys()) == ["critical_values", "e", "k_max", "levels"]
    assert all(sorted(rec.keys()) == ["h", "k", "min_b"]
               for rec in doc["levels"])
