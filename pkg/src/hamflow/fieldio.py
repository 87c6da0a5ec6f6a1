"""Field definition files and the built-in field registry.

A field definition is a JSON object picked by its ``kind``:

``analytic``
    ``{"kind": "analytic", "name": "<builtin>", "params": {...}}`` --
    one of the registered closed-form fields, with optional constructor
    parameters (e.g. ``radius`` for the rotation).

``grid``
    ``{"kind": "grid", "origin": [x, y], "spacing": [hx, hy],
    "values": [[...], ...]}`` plus optional ``name``, ``sup_norm``,
    ``compressibility`` and ``transversality``.  ``values`` is row major:
    ``values[j][i]`` is the streamfunction at ``(x + i*hx, y + j*hy)``.
    The velocity is the skew gradient of the bilinear interpolant, so
    loaded grid fields are divergence-free by construction.

``piecewise``
    ``{"kind": "piecewise", "construction": "cascade" |
    "cascade-mollified", "depth": n}`` -- the nested-cascade profile at a
    finite generation, exact or smoothed.

Floats go through json's default repr round-tripping, which is lossless
for IEEE-754 doubles.  ``load_field`` accepts a path to such a file or
the bare name of a builtin; a missing file whose stem matches the
registry falls back to the registry, so ``--field rotation.json`` works
without writing the file first.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import construction, fields, mollify
from .fields import GridScalarField, PlanarField, ScalarField, Transversality
from .geometry import AxisRect


def _cascade(depth: int = 8) -> PlanarField:
    return construction.build_velocity(int(depth))


def _cascade_smooth(depth: int = 8) -> PlanarField:
    return mollify.build_velocity_smooth(int(depth))


_BUILTINS = {
    "translation": fields.translation_field,
    "rotation": fields.rotation_field,
    "shear": fields.shear_field,
    "gaussian-vortex": fields.gaussian_vortex,
    "smooth": fields.gaussian_vortex,
    "cascade": _cascade,
    "cascade-mollified": _cascade_smooth,
}

# shorthand names: cex_n8, cascade_n4, cex_smooth_n6, ...
_PAT_CASCADE = re.compile(r"^(?:cex|cascade)_n(\d+)$")
_PAT_SMOOTH = re.compile(r"^(?:cex_smooth|cascade_smooth)_n(\d+)$")


def builtin_names() -> list:
    return sorted(_BUILTINS)


def make_field(name: str, **params) -> PlanarField:
    """Construct a registered field by name.

    Pattern names encode the cascade depth directly (``cex_n8`` is the
    exact construction at generation 8, ``cex_smooth_n4`` the mollified
    one); anything else must be a registry entry.
    """
    key = name.strip().lower()
    m = _PAT_SMOOTH.match(key)
    if m:
        b = _cascade_smooth(int(m.group(1)))
        b.io_spec = {"kind": "piecewise", "construction": "cascade-mollified",
                     "depth": int(m.group(1))}
        return b
    m = _PAT_CASCADE.match(key)
    if m:
        b = _cascade(int(m.group(1)))
        b.io_spec = {"kind": "piecewise", "construction": "cascade",
                     "depth": int(m.group(1))}
        return b
    if key not in _BUILTINS:
        raise ValueError(f"unknown field {name!r}; builtins: "
                         f"{', '.join(builtin_names())}, plus cex_n<depth> "
                         f"and cex_smooth_n<depth>")
    try:
        b = _BUILTINS[key](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for field {name!r}: {exc}") from None
    if key in ("cascade", "cascade-mollified"):
        b.io_spec = {"kind": "piecewise",
                     "construction": key,
                     "depth": int(params.get("depth", 8))}
    else:
        b.io_spec = {"kind": "analytic", "name": key,
                     "params": {k: float(v) for k, v in params.items()}}
    return b


# ---------------------------------------------------------------------------
# JSON in

def field_from_json(doc: dict) -> PlanarField:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("a field definition is an object with a 'kind'")
    kind = doc["kind"]
    if kind == "analytic":
        return make_field(doc["name"], **doc.get("params", {}))
    if kind == "piecewise":
        cons = doc.get("construction", "cascade")
        depth = int(doc.get("depth", 8))
        if cons == "cascade":
            return make_field(f"cex_n{depth}")
        if cons == "cascade-mollified":
            return make_field(f"cex_smooth_n{depth}")
        raise ValueError(f"unknown piecewise construction {cons!r}")
    if kind == "grid":
        return _grid_from_json(doc)
    raise ValueError(f"unknown field kind {kind!r}")


def _grid_from_json(doc: dict) -> PlanarField:
    for req in ("origin", "spacing", "values"):
        if req not in doc:
            raise ValueError(f"grid field is missing {req!r}")
    values = np.asarray(doc["values"], dtype=float)
    stream = GridScalarField(tuple(doc["origin"]), tuple(doc["spacing"]),
                             values)
    trans = None
    if doc.get("transversality"):
        tr = doc["transversality"]
        trans = Transversality(tuple(tr["e"]), float(tr["delta"]),
                               AxisRect(*tr["window"]))
    sup = float(doc["sup_norm"]) if "sup_norm" in doc else stream.lipschitz_bound
    b = PlanarField(stream=stream,
                    sup_norm=sup,
                    transversality=trans,
                    compressibility=float(doc.get("compressibility", 1.0)),
                    regularity_tag=str(doc.get("regularity_tag", "grid")),
                    name=str(doc.get("name", "grid-field")))
    b.io_spec = grid_spec(stream, name=b.name, sup_norm=sup,
                          compressibility=b.compressibility,
                          transversality=trans,
                          regularity_tag=b.regularity_tag)
    return b


def load_field(source: Union[str, Path]) -> PlanarField:
    """A field from a definition file, or a builtin by name.

    The file wins when it exists; otherwise the stem (minus a ``.json``
    suffix) is tried against the registry.
    """
    p = Path(source)
    if p.exists():
        with open(p, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return field_from_json(doc)
    stem = p.name
    if stem.endswith(".json"):
        stem = stem[:-5]
    try:
        return make_field(stem)
    except ValueError:
        raise ValueError(f"{source!r} is neither a readable file nor a "
                         f"builtin field name") from None


# ---------------------------------------------------------------------------
# JSON out

def grid_spec(stream: GridScalarField, **meta) -> dict:
    doc = {"kind": "grid",
           "origin": [stream.origin[0], stream.origin[1]],
           "spacing": [stream.spacing[0], stream.spacing[1]],
           "values": [[float(v) for v in row] for row in stream.values]}
    trans = meta.pop("transversality", None)
    if trans is not None:
        w = trans.window
        doc["transversality"] = {"e": [trans.e[0], trans.e[1]],
                                 "delta": trans.delta,
                                 "window": [w.x_lo, w.x_hi, w.y_lo, w.y_hi]}
    for k, v in meta.items():
        if v is not None and v == v and v != float("inf"):
            doc[k] = v
    return doc


def field_to_json(b: PlanarField) -> dict:
    """A serializable definition of the field, when one exists."""
    spec = getattr(b, "io_spec", None)
    if spec is not None:
        return json.loads(json.dumps(spec))
    inner = construction.cascade_inner(b)
    if inner is not None:
        return {"kind": "piecewise", "construction": "cascade",
                "depth": inner.depth}
    stream = getattr(b, "stream", None)
    if isinstance(stream, construction._NegatedField) and \
            isinstance(stream.inner, mollify.SmoothProfile):
        return {"kind": "piecewise", "construction": "cascade-mollified",
                "depth": stream.inner.depth}
    if isinstance(stream, GridScalarField):
        sup = b.sup_norm if np.isfinite(b.sup_norm) else None
        return grid_spec(stream, name=b.name, sup_norm=sup,
                         compressibility=b.compressibility,
                         transversality=b.transversality,
                         regularity_tag=b.regularity_tag)
    if b.name in _BUILTINS:
        return {"kind": "analytic", "name": b.name, "params": {}}
    raise ValueError(f"field {b.name!r} has no serializable definition")


def save_field(b: PlanarField, path: Union[str, Path]) -> None:
    doc = field_to_json(b)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# sampling a field onto a grid

def sample_to_grid(b: PlanarField, window: Optional[AxisRect] = None,
                   n: int = 256) -> PlanarField:
    """Sample the streamfunction onto an (n+1) x (n+1) node grid.

    The result is a standalone grid-backed field over the window; its
    velocity is the skew gradient of the bilinear interpolant of the
    sampled H, so it approximates b at interior points of smooth cells.
    """
    stream = getattr(b, "stream", None)
    if stream is None:
        raise ValueError("only streamfunction-backed fields can be sampled "
                         "to a grid")
    if window is None:
        window = b.domain
    if n < 1:
        raise ValueError("the grid needs at least one cell per side")
    xs = np.linspace(window.x_lo, window.x_hi, n + 1)
    ys = np.linspace(window.y_lo, window.y_hi, n + 1)
    gx, gy = np.meshgrid(xs, ys)
    vals = stream.value_many(gx.ravel(), gy.ravel()).reshape(n + 1, n + 1)
    grid = GridScalarField((window.x_lo, window.y_lo),
                           (float(xs[1] - xs[0]), float(ys[1] - ys[0])),
                           vals)
    sup = b.sup_norm if np.isfinite(b.sup_norm) else grid.lipschitz_bound
    sampled = PlanarField(stream=grid, sup_norm=sup,
                          compressibility=b.compressibility,
                          regularity_tag="grid",
                          name=f"{b.name}-grid{n}")
    sampled.io_spec = grid_spec(grid, name=sampled.name, sup_norm=sup,
                                compressibility=b.compressibility,
                                regularity_tag="grid")
    return sampled
