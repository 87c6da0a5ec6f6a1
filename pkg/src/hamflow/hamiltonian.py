"""Streamfunction recovery and level-curve charts.

A divergence-free planar field is the skew gradient of a streamfunction H,
and where the field crosses a direction e at speed b . e >= delta > 0 every
level set {H = h} is a Lipschitz graph over e.  This module rebuilds H from
b by path integrals, extracts level curves column by column with fixed-count
bisection, and classifies levels by their minimum speed into the nested
regular pieces that the flow estimates quantify over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import construction, quadrature
from .errors import DivergenceError, DomainError, TransversalityError
from .fields import PlanarField, ScalarField, low_discrepancy_points
from .geometry import AxisRect, Point

_ENDPOINT_SLACK = 1e-9


# ---------------------------------------------------------------------------
# streamfunction from a velocity field

class _PathIntegralStream(ScalarField):
    """Streamfunction rebuilt from b by axis-aligned path integrals.

    The value averages the two elbow paths from the base point; their
    difference is the divergence integral over the spanned rectangle, so it
    doubles as a consistency residual.  The gradient is (b2, -b1) directly.
    """

    def __init__(self, b: PlanarField, base: Point):
        self.b = b
        self.base = (float(base[0]), float(base[1]))
        self.domain = b.domain
        self.lipschitz_bound = b.sup_norm if math.isfinite(b.sup_norm) else None
        self.name = f"stream({b.name})"

    def _elbow_h_then_v(self, x: float, y: float) -> float:
        x0, y0 = self.base
        acc = quadrature.integrate(lambda s: self.b.velocity(s, y0)[1], x0, x)
        acc -= quadrature.integrate(lambda s: self.b.velocity(x, s)[0], y0, y)
        return acc

    def _elbow_v_then_h(self, x: float, y: float) -> float:
        x0, y0 = self.base
        acc = -quadrature.integrate(lambda s: self.b.velocity(x0, s)[0], y0, y)
        acc += quadrature.integrate(lambda s: self.b.velocity(s, y)[1], x0, x)
        return acc

    def value(self, x, y):
        self.check_domain(x, y)
        return 0.5 * (self._elbow_h_then_v(x, y) + self._elbow_v_then_h(x, y))

    def gradient(self, x, y):
        self.check_domain(x, y)
        b1, b2 = self.b.velocity(x, y)
        return b2, -b1

    def residual(self, x: float, y: float) -> float:
        """Path-independence defect: |integral of div b| over base-to-(x,y)."""
        return abs(self._elbow_h_then_v(x, y) - self._elbow_v_then_h(x, y))


def streamfunction(b: PlanarField, base: Optional[Point] = None,
                   divergence_tol: float = 1e-6,
                   check_cells: int = 8) -> ScalarField:
    """Streamfunction H with dH = (b2, -b1) dz and H(base) = 0.

    Before building, the field is screened on a check_cells x check_cells
    grid: the circulation defect of each cell equals the divergence integral
    over it, and any cell above divergence_tol rejects the input, naming the
    cell and its residual.  base defaults to the domain center.
    """
    dom = b.domain
    if base is None:
        base = Point(*dom.center())
    if not dom.contains(base[0], base[1]):
        raise DomainError(f"base point {tuple(base)} outside field domain")
    xs = np.linspace(dom.x_lo, dom.x_hi, check_cells + 1)
    ys = np.linspace(dom.y_lo, dom.y_hi, check_cells + 1)
    for i in range(check_cells):
        for j in range(check_cells):
            x1, x2, y1, y2 = xs[i], xs[i + 1], ys[j], ys[j + 1]
            defect = (
                quadrature.integrate(lambda s: b.velocity(s, y1)[1] - b.velocity(s, y2)[1], x1, x2)
                + quadrature.integrate(lambda t: b.velocity(x1, t)[0] - b.velocity(x2, t)[0], y1, y2))
            if abs(defect) > divergence_tol:
                raise DivergenceError(
                    f"field is not divergence free: cell circulation defect "
                    f"{defect:.3e} exceeds {divergence_tol:.1e}",
                    cell=AxisRect(x1, x2, y1, y2), residual=abs(defect))
    return _PathIntegralStream(b, base)


# ---------------------------------------------------------------------------
# level curves as Lipschitz graphs

@dataclass(frozen=True, eq=False)
class LevelCurve:
    """One level set {H = h} inside a window, as a graph over direction e.

    breakpoints are the graph coordinates xi = z . e of the extracted
    columns; points are the matching plane positions.  Between breakpoints
    the graph is taken affine.  O_h = [o_lo, o_hi] is the chart interval.
    """

    h: float
    e: Tuple[float, float]
    o_lo: float
    o_hi: float
    points: np.ndarray            # (N, 2) plane coordinates, increasing xi
    graph_lipschitz_L: float
    window: AxisRect
    delta: float

    @property
    def breakpoints(self) -> np.ndarray:
        ex, ey = self.e
        return self.points[:, 0] * ex + self.points[:, 1] * ey

    @property
    def offsets(self) -> np.ndarray:
        ex, ey = self.e
        return -self.points[:, 0] * ey + self.points[:, 1] * ex

    def point_at(self, xi: float) -> Point:
        """Plane point of the (affinely interpolated) graph at coordinate xi."""
        if not (self.o_lo - _ENDPOINT_SLACK <= xi <= self.o_hi + _ENDPOINT_SLACK):
            raise DomainError(f"xi={xi} outside chart interval "
                              f"[{self.o_lo}, {self.o_hi}]")
        eta = float(np.interp(xi, self.breakpoints, self.offsets))
        ex, ey = self.e
        return Point(xi * ex - eta * ey, xi * ey + eta * ex)

    def csv_rows(self) -> Iterator[Tuple[float, float, float]]:
        for px, py in self.points:
            yield float(px), float(py), self.h


def _column_spans(window: AxisRect, e: Tuple[float, float], xis: np.ndarray):
    """Offset interval of each column line {xi e + eta e_perp} inside window."""
    ex, ey = e
    lo = np.full(xis.shape, -math.inf)
    hi = np.full(xis.shape, math.inf)
    # x = xi ex - eta ey in [x_lo, x_hi]; y = xi ey + eta ex in [y_lo, y_hi]
    for a, coef, c_lo, c_hi in ((-ey, ex, window.x_lo, window.x_hi),
                                (ex, ey, window.y_lo, window.y_hi)):
        l = c_lo - coef * xis
        u = c_hi - coef * xis
        if a > 1e-15:
            lo = np.maximum(lo, l / a)
            hi = np.minimum(hi, u / a)
        elif a < -1e-15:
            lo = np.maximum(lo, u / a)
            hi = np.minimum(hi, l / a)
        else:
            dead = (l > 0) | (u < 0)
            hi = np.where(dead, lo - 1.0, hi)
    return lo, hi


def _longest_true_run(ok: np.ndarray) -> Tuple[int, int]:
    """Start index and length of the longest contiguous run of True."""
    best_start, best_len, start = 0, 0, None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = i
        if (not flag or i == len(ok) - 1) and start is not None:
            end = i + 1 if flag else i
            if end - start > best_len:
                best_start, best_len = start, end - start
            start = None
    return best_start, best_len


def level_curve(H: ScalarField, h: float, window: AxisRect,
                e: Tuple[float, float] = (1.0, 0.0), delta: float = 0.0,
                x_resolution: Optional[float] = None) -> LevelCurve:
    """Extract {H = h} in window as a Lipschitz graph over direction e.

    Columns perpendicular to e are placed at x_resolution spacing; on each,
    H is strictly decreasing along e-perp wherever b . e >= delta > 0, so 64
    fixed bisection steps locate the crossing to floating-point resolution.
    Columns whose endpoint values do not straddle h are excluded; the curve
    is the longest contiguous run of crossing columns.  A column with values
    increasing across h means the transversality assumption fails there, as
    does a breakpoint where the measured b . e dips below delta.
    """
    for cx, cy in ((window.x_lo, window.y_lo), (window.x_lo, window.y_hi),
                   (window.x_hi, window.y_lo), (window.x_hi, window.y_hi)):
        if not H.domain.contains(cx, cy):
            raise DomainError(f"window corner ({cx}, {cy}) outside the "
                              f"streamfunction domain {H.domain.as_tuple()}")
    nrm = math.hypot(e[0], e[1])
    if nrm == 0.0:
        raise ValueError("chart direction e must be nonzero")
    ex, ey = e[0] / nrm, e[1] / nrm
    corners_xi = [window.x_lo * ex + window.y_lo * ey,
                  window.x_lo * ex + window.y_hi * ey,
                  window.x_hi * ex + window.y_lo * ey,
                  window.x_hi * ex + window.y_hi * ey]
    xi_lo, xi_hi = min(corners_xi), max(corners_xi)
    span = xi_hi - xi_lo
    if x_resolution is None:
        x_resolution = span / 256.0
    if x_resolution <= 0:
        raise ValueError("x_resolution must be positive")
    n_cols = int(math.floor(span / x_resolution + 1e-9))
    xis = xi_lo + x_resolution * np.arange(n_cols + 1)

    eta_lo, eta_hi = _column_spans(window, (ex, ey), xis)
    alive = eta_hi - eta_lo > 0
    # endpoint values; dead columns get harmless placeholder coordinates
    eta_lo_safe = np.where(alive, eta_lo, 0.0)
    eta_hi_safe = np.where(alive, eta_hi, 0.0)

    def plane(xi, eta):
        return xi * ex - eta * ey, xi * ey + eta * ex

    px, py = plane(xis, eta_lo_safe)
    phi_lo = H.value_many(px, py) - h
    px, py = plane(xis, eta_hi_safe)
    phi_hi = H.value_many(px, py) - h

    increasing = alive & (phi_lo < 0) & (phi_hi > 0)
    if increasing.any():
        j = int(np.argmax(increasing))
        raise TransversalityError(
            f"H increases along the column at xi={xis[j]:.6g}: "
            "transversality b . e > 0 fails in the window")
    crossing = alive & (phi_lo >= 0) & (phi_hi <= 0)
    start, length = _longest_true_run(crossing)
    if length == 0:
        raise DomainError(f"level h={h} not attained transversally in window")
    sel = slice(start, start + length)
    xs_sel = xis[sel]
    lo = eta_lo_safe[sel].copy()
    hi = eta_hi_safe[sel].copy()
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        px, py = plane(xs_sel, mid)
        take = H.value_many(px, py) >= h
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    eta = 0.5 * (lo + hi)
    px, py = plane(xs_sel, eta)
    points = np.column_stack([px, py])

    if delta > 0:
        gx, gy = H.gradient_many(px, py)
        b_dot_e = -gy * ex + gx * ey
        worst = int(np.argmin(b_dot_e))
        if b_dot_e[worst] < delta - _ENDPOINT_SLACK * (1.0 + delta):
            raise TransversalityError(
                f"b . e = {b_dot_e[worst]:.6g} < delta = {delta} at "
                f"({px[worst]:.6g}, {py[worst]:.6g})")

    if length > 1:
        L = float(np.max(np.abs(np.diff(eta)) / np.diff(xs_sel)))
    else:
        L = 0.0
    return LevelCurve(h=float(h), e=(ex, ey), o_lo=float(xs_sel[0]),
                      o_hi=float(xs_sel[-1]), points=points,
                      graph_lipschitz_L=L, window=window, delta=float(delta))


# ---------------------------------------------------------------------------
# level classification by minimum speed

@dataclass(frozen=True)
class LevelRecord:
    """One sampled level: its minimum speed and the band index it lands in.

    k is the smallest integer with min_b > 1/k (0 when even k_max fails),
    so the nested pieces are omega(k) = all records with 0 < record.k <= k.
    """
    h: float
    min_b: float
    k: int
    cover: Optional[AxisRect]


@dataclass(frozen=True)
class RegularDecomposition:
    e: Tuple[float, float]
    k_max: int
    records: Tuple[LevelRecord, ...]
    critical_values: Tuple[float, ...]

    def omega(self, k: int) -> Tuple[LevelRecord, ...]:
        if not 1 <= k <= self.k_max:
            raise ValueError(f"k must be in 1..{self.k_max}")
        return tuple(r for r in self.records if 0 < r.k <= k)

    def to_json_dict(self) -> Dict:
        return {
            "e": [self.e[0], self.e[1]],
            "k_max": self.k_max,
            "critical_values": list(self.critical_values),
            "levels": [{"h": r.h, "min_b": r.min_b, "k": r.k}
                       for r in self.records],
        }


def regular_decomposition(H: ScalarField, b: PlanarField, window: AxisRect,
                          k_max: int, h_resolution: float,
                          x_resolution: Optional[float] = None,
                          extra_levels: Sequence[float] = (),
                          samples: int = 512) -> RegularDecomposition:
    """Classify levels of H by minimum speed along their curves.

    The chart direction is the normalized mean of b over the window.  Levels
    are sampled uniformly at h_resolution spacing across the observed range,
    together with any extra_levels and, for a cascade-built velocity, the
    construction's own row-boundary levels, so no speed band is skipped.
    Levels whose curve extraction fails, or whose minimum speed is too small
    for every tracked band, are reported as critical values.
    """
    if k_max < 1:
        raise ValueError("k_max >= 1 required")
    if h_resolution <= 0:
        raise ValueError("h_resolution must be positive")
    pts = low_discrepancy_points(window, samples)
    vx, vy = b.velocity_many(pts[:, 0], pts[:, 1])
    mx, my = float(vx.mean()), float(vy.mean())
    nrm = math.hypot(mx, my)
    if nrm < 1e-12:
        raise TransversalityError(
            "window has no dominant flow direction to chart over")
    e = (mx / nrm, my / nrm)

    hs = H.value_many(pts[:, 0], pts[:, 1])
    h_min, h_max = float(hs.min()), float(hs.max())
    levels = set(np.arange(h_min + 0.5 * h_resolution, h_max, h_resolution)
                 .tolist())
    inner = construction.cascade_inner(b)
    if inner is not None:
        levels.update(v for v in construction.critical_levels(inner.depth)
                      if h_min < v < h_max)
    levels.update(v for v in extra_levels if h_min < v < h_max)

    records: List[LevelRecord] = []
    critical: List[float] = []
    for h in sorted(levels):
        try:
            curve = level_curve(H, h, window, e=e, x_resolution=x_resolution)
        except (DomainError, TransversalityError):
            critical.append(h)
            continue
        cvx, cvy = b.velocity_many(curve.points[:, 0], curve.points[:, 1])
        m = float(np.hypot(cvx, cvy).min())
        if m * k_max > 1.0:
            k = max(1, int(math.floor(1.0 / m)) + 1)
        else:
            k = 0
            critical.append(h)
        # bounding box of the curve, padded by the extraction resolution so a
        # flat curve still covers a band of positive height
        pad = 0.5 * (curve.breakpoints[1] - curve.breakpoints[0]
                     if len(curve.points) > 1 else h_resolution)
        cover = AxisRect(float(curve.points[:, 0].min()) - pad,
                         float(curve.points[:, 0].max()) + pad,
                         float(curve.points[:, 1].min()) - pad,
                         float(curve.points[:, 1].max()) + pad)
        records.append(LevelRecord(h=h, min_b=m, k=k, cover=cover))
    return RegularDecomposition(e=e, k_max=k_max, records=tuple(records),
                                critical_values=tuple(critical))
