"""Field definition files: registry lookups, JSON round trips, grid
sampling."""
import json
import math

import numpy as np
import pytest

from hamflow import construction, fieldio
from hamflow.fields import PlanarField
from hamflow.geometry import AxisRect


def test_builtin_names():
    names = fieldio.builtin_names()
    assert names == sorted(names)
    for expect in ("translation", "rotation", "shear", "gaussian-vortex",
                   "cascade", "cascade-mollified"):
        assert expect in names


def test_make_field_analytic_with_params():
    b = fieldio.make_field("rotation", radius=1.5)
    assert b.io_spec == {"kind": "analytic", "name": "rotation",
                         "params": {"radius": 1.5}}
    vx, vy = b.velocity(1.0, 0.0)
    assert (vx, vy) == (0.0, 1.0)


def test_make_field_rejects_unknown_and_bad_params():
    with pytest.raises(ValueError, match="unknown field"):
        fieldio.make_field("vortex-sheet")
    with pytest.raises(ValueError, match="bad parameters"):
        fieldio.make_field("rotation", swirl=3.0)


@pytest.mark.parametrize("name", ["cex_n3", "cascade_n3"])
def test_make_field_cascade_patterns(name):
    b = fieldio.make_field(name)
    assert b.io_spec == {"kind": "piecewise", "construction": "cascade",
                         "depth": 3}
    assert construction.cascade_inner(b) is not None


@pytest.mark.parametrize("name", ["cex_smooth_n2", "cascade_smooth_n2"])
def test_make_field_smooth_patterns(name):
    b = fieldio.make_field(name)
    assert b.io_spec == {"kind": "piecewise",
                         "construction": "cascade-mollified", "depth": 2}


def test_field_to_json_routes():
    assert fieldio.field_to_json(fieldio.make_field("translation")) == \
        {"kind": "analytic", "name": "translation", "params": {}}
    assert fieldio.field_to_json(construction.build_velocity(4)) == \
        {"kind": "piecewise", "construction": "cascade", "depth": 4}


def test_field_to_json_rejects_anonymous_closures():
    b = PlanarField(components=(lambda x, y: 1.0 + 0.0 * x,
                                lambda x, y: 0.0 * y),
                    domain=AxisRect(0.0, 1.0, 0.0, 1.0), sup_norm=1.0,
                    name="ad-hoc")
    with pytest.raises(ValueError, match="no serializable definition"):
        fieldio.field_to_json(b)


def test_save_load_round_trip_cascade(tmp_path):
    b = fieldio.make_field("cex_n3")
    path = tmp_path / "cex.json"
    fieldio.save_field(b, path)
    b2 = fieldio.load_field(path)
    # same construction parameters reproduce bitwise identical velocities
    for z in ((0.5, 0.25), (0.43, 0.08), (-1.0, 0.7)):
        assert b.velocity(*z) == b2.velocity(*z)


def test_load_field_registry_fallback(tmp_path):
    # no file: the stem is tried against the registry
    b = fieldio.load_field(tmp_path / "rotation.json")
    assert b.io_spec["name"] == "rotation"
    # a real file shadows the builtin of the same name
    path = tmp_path / "rotation.json"
    path.write_text(json.dumps(
        {"kind": "analytic", "name": "translation"}), encoding="utf-8")
    assert fieldio.load_field(path).io_spec["name"] == "translation"
    with pytest.raises(ValueError, match="neither a readable file"):
        fieldio.load_field(tmp_path / "no-such-field.json")


def test_field_from_json_validation():
    with pytest.raises(ValueError, match="'kind'"):
        fieldio.field_from_json({"name": "rotation"})
    with pytest.raises(ValueError, match="unknown field kind"):
        fieldio.field_from_json({"kind": "spectral"})
    with pytest.raises(ValueError, match="unknown piecewise construction"):
        fieldio.field_from_json({"kind": "piecewise", "construction": "stair"})
    with pytest.raises(ValueError, match="missing"):
        fieldio.field_from_json({"kind": "grid", "origin": [0, 0],
                                 "spacing": [1, 1]})


def test_grid_round_trip_node_exact(tmp_path):
    b = fieldio.make_field("shear")
    g = fieldio.sample_to_grid(b, AxisRect(0.0, 1.0, 0.0, 1.0), n=16)
    assert g.name == "shear-grid16"
    path = tmp_path / "grid.json"
    fieldio.save_field(g, path)
    g2 = fieldio.load_field(path)
    # json float repr round-trips IEEE doubles, so nodes are bitwise equal
    assert np.array_equal(g.stream.values, g2.stream.values)
    assert g.stream.origin == g2.stream.origin
    assert g.stream.spacing == g2.stream.spacing
    assert g.velocity(0.3, 0.4) == g2.velocity(0.3, 0.4)


def test_grid_json_transversality_block(tmp_path):
    doc = {"kind": "grid", "origin": [0.0, 0.0], "spacing": [0.5, 0.5],
           "values": [[0.0, 0.0, 0.0], [-0.5, -0.5, -0.5], [-1.0, -1.0, -1.0]],
           "name": "unit-drift", "sup_norm": 1.0,
           "transversality": {"e": [1.0, 0.0], "delta": 1.0,
                              "window": [0.0, 1.0, 0.0, 1.0]}}
    b = fieldio.field_from_json(doc)
    assert b.transversality is not None
    assert b.transversality.e == (1.0, 0.0)
    assert b.transversality.delta == 1.0
    # H = -y gives the unit rightward drift at cell interiors
    assert b.velocity(0.25, 0.25) == (1.0, 0.0)
    path = tmp_path / "drift.json"
    fieldio.save_field(b, path)
    doc2 = json.loads(path.read_text(encoding="utf-8"))
    assert doc2["transversality"] == doc["transversality"]


def test_sample_to_grid_accuracy():
    # bilinear skew gradient approximates the smooth rotation away from nodes
    b = fieldio.make_field("rotation")
    g = fieldio.sample_to_grid(b, AxisRect(-1.0, 1.0, -1.0, 1.0), n=64)
    for z in ((0.313, 0.207), (-0.551, 0.4), (0.0, -0.73)):
        vx, vy = b.velocity(*z)
        wx, wy = g.velocity(*z)
        assert math.hypot(wx - vx, wy - vy) < 0.05


def test_sample_to_grid_requires_stream():
    b = PlanarField(components=(lambda x, y: 1.0 + 0.0 * x,
                                lambda x, y: 0.0 * y),
                    domain=AxisRect(0.0, 1.0, 0.0, 1.0), sup_norm=1.0)
    with pytest.raises(ValueError, match="streamfunction"):
        fieldio.sample_to_grid(b)
    with pytest.raises(ValueError, match="at least one cell"):
        fieldio.sample_to_grid(fieldio.make_field("rotation"), n=0)
