"""Scalar and vector field abstractions.

A ``ScalarField`` is an evaluable planar scalar function (a streamfunction,
or one of the cascade construction's piecewise-affine stages) with a gradient
wherever the backend defines one.  A ``PlanarField`` is an evaluable planar
velocity field, either the skew gradient of a ScalarField or a pair of direct
component callables, and carries the metadata the estimate verifiers need:
a sup-norm bound, an optional directional lower bound (transversality), and
a compressibility constant.

Evaluation conventions
----------------------
* Everything is deterministic: the same inputs give bitwise-identical
  outputs, which the sampling helpers rely on.
* Piecewise backends resolve seam points with the right/upper rule: a point
  on a cell boundary evaluates from the cell with larger x, ties toward
  larger y.  Subclasses implement this via half-open cell membership.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError
from .geometry import AxisRect, Point


# ---------------------------------------------------------------------------
# scalar fields

class ScalarField:
    """Base class: deterministic scalar function on an axis-aligned domain."""

    domain: AxisRect
    lipschitz_bound: Optional[float] = None

    def value(self, x: float, y: float) -> float:
        raise NotImplementedError

    def gradient(self, x: float, y: float) -> tuple:
        raise NotImplementedError

    def check_domain(self, x, y):
        if not self.domain.contains(x, y):
            raise DomainError(f"point ({x}, {y}) outside domain {self.domain.as_tuple()}")

    # vectorized defaults: plain loops, overridden where speed matters
    def value_many(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        out = np.empty(xs.shape, dtype=float)
        flat_x, flat_y, flat_o = xs.ravel(), ys.ravel(), out.ravel()
        for i in range(flat_x.size):
            flat_o[i] = self.value(flat_x[i], flat_y[i])
        return out

    def gradient_many(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        gx = np.empty(xs.shape, dtype=float)
        gy = np.empty(xs.shape, dtype=float)
        fx, fy = xs.ravel(), ys.ravel()
        ox, oy = gx.ravel(), gy.ravel()
        for i in range(fx.size):
            ox[i], oy[i] = self.gradient(fx[i], fy[i])
        return gx, gy


class AnalyticScalarField(ScalarField):
    """Closed-form scalar field given by numpy-compatible callables."""

    def __init__(self, fn: Callable, grad_fn: Callable, domain: AxisRect,
                 lipschitz_bound: Optional[float] = None, name: str = "analytic"):
        self.fn = fn
        self.grad_fn = grad_fn
        self.domain = domain
        self.lipschitz_bound = lipschitz_bound
        self.name = name

    def value(self, x, y):
        return float(self.fn(x, y))

    def gradient(self, x, y):
        gx, gy = self.grad_fn(x, y)
        return float(gx), float(gy)

    def value_many(self, xs, ys):
        return np.asarray(self.fn(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)), dtype=float)

    def gradient_many(self, xs, ys):
        gx, gy = self.grad_fn(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        shape = np.broadcast(np.asarray(xs), np.asarray(ys)).shape
        return (np.broadcast_to(np.asarray(gx, dtype=float), shape).copy(),
                np.broadcast_to(np.asarray(gy, dtype=float), shape).copy())


class GridScalarField(ScalarField):
    """Grid samples with bilinear interpolation.

    The gradient is the exact gradient of the bilinear interpolant, so the
    induced velocity field stays locally Lipschitz inside every cell and the
    Runge-Kutta oracle is well posed there.
    """

    def __init__(self, origin: tuple, spacing: tuple, values: np.ndarray):
        self.origin = (float(origin[0]), float(origin[1]))
        self.spacing = (float(spacing[0]), float(spacing[1]))
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise ValueError("grid needs at least 2x2 samples")
        ny, nx = self.values.shape
        self.domain = AxisRect(self.origin[0], self.origin[0] + (nx - 1) * self.spacing[0],
                               self.origin[1], self.origin[1] + (ny - 1) * self.spacing[1])
        dvy, dvx = np.gradient(self.values, self.spacing[1], self.spacing[0])
        self.lipschitz_bound = float(np.hypot(dvx, dvy).max())

    def _locate(self, x, y):
        hx, hy = self.spacing
        ny, nx = self.values.shape
        ix = min(int((x - self.origin[0]) / hx), nx - 2)
        iy = min(int((y - self.origin[1]) / hy), ny - 2)
        ix = max(ix, 0)
        iy = max(iy, 0)
        tx = (x - self.origin[0]) / hx - ix
        ty = (y - self.origin[1]) / hy - iy
        return ix, iy, tx, ty

    def value(self, x, y):
        self.check_domain(x, y)
        ix, iy, tx, ty = self._locate(x, y)
        v = self.values
        return float((1 - tx) * (1 - ty) * v[iy, ix] + tx * (1 - ty) * v[iy, ix + 1]
                     + (1 - tx) * ty * v[iy + 1, ix] + tx * ty * v[iy + 1, ix + 1])

    def gradient(self, x, y):
        self.check_domain(x, y)
        ix, iy, tx, ty = self._locate(x, y)
        v = self.values
        hx, hy = self.spacing
        gx = ((1 - ty) * (v[iy, ix + 1] - v[iy, ix]) + ty * (v[iy + 1, ix + 1] - v[iy + 1, ix])) / hx
        gy = ((1 - tx) * (v[iy + 1, ix] - v[iy, ix]) + tx * (v[iy + 1, ix + 1] - v[iy, ix + 1])) / hy
        return float(gx), float(gy)


# ---------------------------------------------------------------------------
# vector fields

@dataclass(frozen=True)
class Transversality:
    """Declared directional bound: b . e >= delta on the window."""

    e: tuple
    delta: float
    window: AxisRect

    def __post_init__(self):
        norm = math.hypot(*self.e)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError("direction e must be a unit vector")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


def perp_gradient(H: ScalarField, z: Point) -> tuple:
    """Skew gradient (-dH/dy, dH/dx) of a streamfunction at a point.

    This is the divergence-free velocity whose level sets are the
    streamlines of H.
    """
    H.check_domain(z[0], z[1])
    gx, gy = H.gradient(z[0], z[1])
    return (-gy, gx)


class PlanarField:
    """Planar velocity field with estimate metadata.

    Parameters
    ----------
    stream : ScalarField, optional
        When given, the velocity is the skew gradient of this field.
    components : (callable, callable), optional
        Direct component functions; mutually exclusive with ``stream``.
    sup_norm : float
        Upper bound for |b| on the domain.
    transversality : Transversality, optional
    compressibility : float
        Density bound of the transported measure; 1 for divergence-free.
    """

    def __init__(self, stream: Optional[ScalarField] = None,
                 components: Optional[tuple] = None,
                 domain: Optional[AxisRect] = None,
                 sup_norm: float = math.inf,
                 transversality: Optional[Transversality] = None,
                 compressibility: float = 1.0,
                 regularity_tag: str = "unknown",
                 name: str = "field"):
        if (stream is None) == (components is None):
            raise ValueError("exactly one of stream/components is required")
        if compressibility < 1.0:
            raise ValueError("compressibility constant is >= 1")
        self.stream = stream
        self.components = components
        self.domain = domain if domain is not None else (stream.domain if stream else None)
        if self.domain is None:
            raise ValueError("direct-component fields need an explicit domain")
        self.sup_norm = float(sup_norm)
        self.transversality = transversality
        self.compressibility = float(compressibility)
        self.regularity_tag = regularity_tag
        self.name = name

    def velocity(self, x: float, y: float) -> tuple:
        if self.stream is not None:
            return perp_gradient(self.stream, (x, y))
        b1, b2 = self.components
        return float(b1(x, y)), float(b2(x, y))

    def velocity_many(self, xs, ys):
        if self.stream is not None:
            gx, gy = self.stream.gradient_many(xs, ys)
            return -gy, gx
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        b1, b2 = self.components
        shape = np.broadcast(xs, ys).shape
        return (np.broadcast_to(np.asarray(b1(xs, ys), dtype=float), shape).copy(),
                np.broadcast_to(np.asarray(b2(xs, ys), dtype=float), shape).copy())

    def speed(self, x, y):
        vx, vy = self.velocity(x, y)
        return math.hypot(vx, vy)


# ---------------------------------------------------------------------------
# deterministic sampling

_PLASTIC = 1.324717957244746025960908854  # real root of x^3 = x + 1


def low_discrepancy_points(window: AxisRect, n: int) -> np.ndarray:
    """First n points of the R2 additive recurrence, mapped into the window.

    Quasi-random but fully deterministic, so repeated statistics calls are
    bitwise reproducible.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    a1 = 1.0 / _PLASTIC
    a2 = 1.0 / _PLASTIC ** 2
    k = np.arange(1, n + 1, dtype=float)
    u = np.mod(0.5 + a1 * k, 1.0)
    v = np.mod(0.5 + a2 * k, 1.0)
    pts = np.empty((n, 2))
    pts[:, 0] = window.x_lo + u * window.width
    pts[:, 1] = window.y_lo + v * window.height
    return pts


@dataclass(frozen=True)
class FieldStats:
    sup_norm: float
    min_along_e: Optional[float]
    samples: int


def field_stats(b: PlanarField, window: AxisRect, samples: int) -> FieldStats:
    """Deterministic sampled sup |b| and, if declared, min of b . e.

    The minimum is an upper estimate of the true minimum: it can only miss
    dips between sample points, never invent them.
    """
    if samples < 1:
        raise ValueError("samples >= 1 required")
    pts = low_discrepancy_points(window, samples)
    vx, vy = b.velocity_many(pts[:, 0], pts[:, 1])
    speeds = np.hypot(vx, vy)
    sup = float(speeds.max())
    min_e = None
    if b.transversality is not None:
        e1, e2 = b.transversality.e
        min_e = float((vx * e1 + vy * e2).min())
    return FieldStats(sup_norm=sup, min_along_e=min_e, samples=samples)


def divergence_residual(b: PlanarField, window: AxisRect, samples: int = 256,
                        step: float = 1e-5) -> float:
    """Max |div b| over a deterministic sample set, by central differences."""
    pts = low_discrepancy_points(window.shrunk(2 * step * max(window.width, window.height)),
                                 samples)
    hx = step * window.width
    hy = step * window.height
    worst = 0.0
    for x, y in pts:
        b1p, _ = b.velocity(x + hx, y)
        b1m, _ = b.velocity(x - hx, y)
        _, b2p = b.velocity(x, y + hy)
        _, b2m = b.velocity(x, y - hy)
        worst = max(worst, abs((b1p - b1m) / (2 * hx) + (b2p - b2m) / (2 * hy)))
    return worst


# ---------------------------------------------------------------------------
# stock analytic fields (used throughout the tests and the CLI)

def translation_field() -> PlanarField:
    dom = AxisRect(-2.0, 3.0, -2.0, 2.0)
    H = AnalyticScalarField(lambda x, y: -y + 0.0 * x,
                            lambda x, y: (0.0 * x, -1.0 + 0.0 * y),
                            dom, lipschitz_bound=1.0, name="uniform-translation")
    return PlanarField(stream=H, sup_norm=1.0,
                       transversality=Transversality((1.0, 0.0), 1.0, dom),
                       regularity_tag="smooth", name="translation")


def rotation_field(radius: float = 2.0) -> PlanarField:
    dom = AxisRect(-radius, radius, -radius, radius)
    H = AnalyticScalarField(lambda x, y: 0.5 * (x * x + y * y),
                            lambda x, y: (x, y),
                            dom, lipschitz_bound=math.sqrt(2.0) * radius, name="rigid-rotation")
    return PlanarField(stream=H, sup_norm=math.sqrt(2.0) * radius,
                       regularity_tag="smooth", name="rotation")


def shear_field() -> PlanarField:
    # b = (1 + y^2, 0) on [0,1]^2 style windows, streamfunction -(y + y^3/3)
    dom = AxisRect(-2.0, 3.0, -1.0, 2.0)
    H = AnalyticScalarField(lambda x, y: -(y + y ** 3 / 3.0) + 0.0 * x,
                            lambda x, y: (0.0 * x, -(1.0 + y * y)),
                            dom, lipschitz_bound=5.0, name="quadratic-shear")
    return PlanarField(stream=H, sup_norm=5.0,
                       transversality=Transversality((1.0, 0.0), 1.0, dom),
                       regularity_tag="smooth", name="shear")


def gaussian_vortex(width: float = 0.5, radius: float = 2.0) -> PlanarField:
    """Isolated smooth vortex: H = exp(-r^2 / (2 w^2)), circulating flow.

    Speed |b| = (r / w^2) exp(-r^2 / (2 w^2)) peaks at r = w and decays to
    ~ 3e-4 at the default domain corner, so the near-zero annulus at the
    rim exercises the degenerate side of the sublevel machinery while the
    core ring stays uniformly transversal.
    """
    if width <= 0.0 or radius <= 0.0:
        raise ValueError("width and radius must be positive")
    w2 = width * width
    dom = AxisRect(-radius, radius, -radius, radius)

    def value(x, y):
        return np.exp(-(x * x + y * y) / (2.0 * w2)) + 0.0 * x

    def grad(x, y):
        g = np.exp(-(x * x + y * y) / (2.0 * w2)) / w2
        return -x * g, -y * g

    sup = math.exp(-0.5) / width         # |b| at r = width
    H = AnalyticScalarField(value, grad, dom,
                            lipschitz_bound=sup, name="gaussian-bump")
    return PlanarField(stream=H, sup_norm=sup,
                       regularity_tag="smooth", name="gaussian-vortex")
