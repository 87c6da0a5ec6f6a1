"""Flow maps for autonomous planar fields, computed by two independent routes.

Route one integrates dz/dt = b(z) with the adaptive Runge-Kutta kernel and
knows nothing about the structure of b.  Route two never touches the ODE:
it confines the trajectory to a level curve of the streamfunction and
advances the graph coordinate xi by the kinematic relation

    dxi/dt = (b . e)(z(xi)),

which is exact for autonomous divergence-free fields.  The two routes share
no code below the field interface, so their agreement is an end-to-end
check of both; the verification layer compares them on purpose and nothing
here should ever collapse them into one.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import construction, quadrature, rk
from .errors import (DomainError, NumericalError, ResolutionError,
                     TransversalityError)
from .fields import PlanarField, ScalarField
from .geometry import AxisRect, Point
from .hamiltonian import LevelCurve

FLOW_OK = "ok"
FLOW_EXITED = "exited"
FLOW_UNDERFLOW = "underflow"

_ENDPOINT_SLACK = 1e-9


# ---------------------------------------------------------------------------
# timing along an extracted level curve

def time_along_level(curve: LevelCurve, b: PlanarField, xi0: float, xi1: float,
                     extra_breakpoints: Iterable[float] = ()) -> float:
    """Travel time along a level curve between graph coordinates.

    Integrates 1/(b . e) over [xi0, xi1]; the integral is cut at the
    curve's own column breakpoints, where the affine graph has corners.
    Signed: xi1 < xi0 gives the (negative) time of the reversed leg.
    """
    for xi in (xi0, xi1):
        span = max(curve.o_hi - curve.o_lo, 1.0)
        if not (curve.o_lo - _ENDPOINT_SLACK * span <= xi
                <= curve.o_hi + _ENDPOINT_SLACK * span):
            raise DomainError(f"xi={xi} outside chart interval "
                              f"[{curve.o_lo}, {curve.o_hi}]")
    ex, ey = curve.e
    floor = 0.5 * curve.delta

    def inv_speed(xi):
        p = curve.point_at(float(xi))
        bx, by = b.velocity(p.x, p.y)
        s = bx * ex + by * ey
        if s <= 0.0 or s < floor:
            raise TransversalityError(
                f"b . e = {s} at xi={xi} on level h={curve.h}; "
                f"the level-curve clock needs b . e > 0")
        return 1.0 / s

    cuts = list(curve.breakpoints) + [float(t) for t in extra_breakpoints]
    return quadrature.integrate(inv_speed, float(xi0), float(xi1),
                                breakpoints=cuts)


# ---------------------------------------------------------------------------
# Runge-Kutta route

@dataclass(frozen=True)
class FlowOutcome:
    """Flow evaluation with an explicit quality verdict.

    flag "ok" means z(t) was reached; "exited" means the trajectory hit
    the domain boundary at time t_reached and point is the exit state;
    "underflow" means the integrator stalled.  uncertainty bounds the
    distance the true trajectory may have travelled past point.
    """
    point: Point
    flag: str
    t_reached: float
    uncertainty: float


def _projected_rhs(b: PlanarField):
    # Trial stages of the RK step may peek outside the domain even when
    # every accepted state is inside; evaluating at the nearest domain
    # point keeps those probes legal without changing interior dynamics.
    xlo, xhi, ylo, yhi = b.domain.as_tuple()

    def f(t, y):
        x = min(max(float(y[0]), xlo), xhi)
        yy = min(max(float(y[1]), ylo), yhi)
        vx, vy = b.velocity(x, yy)
        return np.array((vx, vy))

    return f


def _projected_rhs_many(b: PlanarField):
    xlo, xhi, ylo, yhi = b.domain.as_tuple()

    def f(t, y):
        xs = np.clip(y[:, 0], xlo, xhi)
        ys = np.clip(y[:, 1], ylo, yhi)
        vx, vy = b.velocity_many(xs, ys)
        return np.stack((vx, vy), axis=1)

    return f


def _refine_exit(rhs, dom: AxisRect, t_in: float, y_in: np.ndarray,
                 t_out: float, tol: float,
                 max_step: Optional[float]) -> Tuple[float, Point]:
    """Bisect the boundary-crossing time bracketed by two accepted states.

    Each trial re-integrates from the last known inside state, so the
    returned point carries integration accuracy rather than the accuracy
    of a step-sized interpolation.
    """
    lo, hi = float(t_in), float(t_out)
    y_lo = np.array(y_in, dtype=float)
    for _ in range(64):
        if hi - lo <= 1e-14 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        r = rk.integrate(rhs, lo, y_lo, mid, tol=tol, max_step=max_step)
        if dom.contains(float(r.y[0]), float(r.y[1])):
            lo, y_lo = mid, r.y
        else:
            hi = mid
    return lo, Point(float(y_lo[0]), float(y_lo[1]))


def rk_flow_ex(b: PlanarField, z: Point, t: float, tol: float = 1e-9,
               max_step: Optional[float] = None) -> FlowOutcome:
    """Flow z for time t by direct adaptive Runge-Kutta integration.

    Exits are detected at accepted integration states and then localized
    by re-integration bisection, so t_reached and the exit point resolve
    the boundary crossing itself, not the step that straddled it.
    """
    if t < 0.0:
        raise ValueError("flows run forward in time")
    z = Point(float(z[0]), float(z[1]))
    if not b.domain.contains(z.x, z.y):
        raise DomainError(f"start point {z} outside the field domain")
    if max_step is None:
        max_step = getattr(b, "suggested_max_step", None)
    dom = b.domain
    first_exit: List[float] = []
    last_inside = [0.0, z.x, z.y]

    def observer(tt, y, dy):
        if first_exit:
            return
        if dom.contains(float(y[0]), float(y[1])):
            last_inside[:] = [float(tt), float(y[0]), float(y[1])]
        else:
            first_exit.append(float(tt))

    rhs = _projected_rhs(b)
    res = rk.integrate(rhs, 0.0, np.array((z.x, z.y)), float(t),
                       tol=tol, max_step=max_step, observer=observer)
    sup = b.sup_norm
    if first_exit:
        t_in, xin, yin = last_inside
        te, pe = _refine_exit(rhs, dom, t_in, np.array((xin, yin)),
                              first_exit[0], tol, max_step)
        return FlowOutcome(pe, FLOW_EXITED, te,
                           sup * (t - te) if math.isfinite(sup) else math.inf)
    if res.flag != rk.FLAG_OK:
        left = t - float(res.t)
        return FlowOutcome(Point(float(res.y[0]), float(res.y[1])),
                           FLOW_UNDERFLOW, float(res.t),
                           sup * left if math.isfinite(sup) else math.inf)
    return FlowOutcome(Point(float(res.y[0]), float(res.y[1])), FLOW_OK,
                       float(t), 0.0)


def rk_flow(b: PlanarField, z: Point, t: float, tol: float = 1e-9,
            max_step: Optional[float] = None) -> Point:
    out = rk_flow_ex(b, z, t, tol=tol, max_step=max_step)
    if out.flag == FLOW_EXITED:
        raise DomainError(f"trajectory from {z} left the domain at "
                          f"t={out.t_reached}")
    if out.flag != FLOW_OK:
        raise NumericalError(f"integrator stalled at t={out.t_reached} "
                             f"(flag {out.flag})")
    return out.point


def rk_flow_many(b: PlanarField, points: np.ndarray, t: float,
                 tol: float = 1e-9,
                 max_step: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Batched Runge-Kutta flow of an (N, 2) array of start points.

    Returns (images, flags) with flags 0 ok, 1 underflow, 2 exited.  The
    batch kernel has no per-step observer, so exits are detected from the
    final state only; a trajectory that leaves and re-enters is not caught
    here (the scalar route is, and the map comparisons use both).
    """
    if t < 0.0:
        raise ValueError("flows run forward in time")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (N, 2) array")
    if max_step is None:
        max_step = getattr(b, "suggested_max_step", None)
    res = rk.integrate_batch(_projected_rhs_many(b), 0.0, pts, float(t),
                             tol=tol, max_step=max_step)
    flags = res.flags.astype(np.int8).copy()
    dom = b.domain
    outside = ~((res.y[:, 0] >= dom.x_lo) & (res.y[:, 0] <= dom.x_hi)
                & (res.y[:, 1] >= dom.y_lo) & (res.y[:, 1] <= dom.y_hi))
    flags[outside] = 2
    return res.y, flags


# ---------------------------------------------------------------------------
# level-set route

def _solve_columns(H: ScalarField, h: float, e: Tuple[float, float],
                   xis: np.ndarray, eta_lo: float,
                   eta_hi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Bisect H = h along the eta direction over a batch of chart columns.

    Assumes H >= h at eta_lo and H <= h at eta_hi on good columns (H
    decreases along +eta when b . e > 0 on the curve); ok marks columns
    where that bracket actually holds.
    """
    xis = np.asarray(xis, dtype=float)
    ex, ey = e

    def plane(eta):
        return xis * ex - eta * ey, xis * ey + eta * ex

    lo = np.full(xis.shape, float(eta_lo))
    hi = np.full(xis.shape, float(eta_hi))
    px, py = plane(lo)
    phi_lo = np.asarray(H.value_many(px, py), dtype=float) - h
    px, py = plane(hi)
    phi_hi = np.asarray(H.value_many(px, py), dtype=float) - h
    ok = (phi_lo >= 0.0) & (phi_hi <= 0.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        px, py = plane(mid)
        take = np.asarray(H.value_many(px, py), dtype=float) >= h
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    return 0.5 * (lo + hi), ok


def _chart_points(e, xis, etas):
    ex, ey = e
    return xis * ex - etas * ey, xis * ey + etas * ex


_GL_NODES = np.asarray(quadrature._NODES)
_GL_WEIGHTS = np.asarray(quadrature._WEIGHTS)


def levelset_flow_ex(H: ScalarField, b: PlanarField, z: Point, t: float,
                     chart_radius: Optional[float] = None,
                     columns: int = 128,
                     max_charts: int = 100_000) -> FlowOutcome:
    """Flow z for time t along the level set {H = H(z)}.

    Walks a sequence of local graph charts: in each one the curve is a
    graph over the direction e = b(z)/|b(z)|, columns are solved by
    bisection, and time is accumulated by Gauss-Legendre integration of
    1/(b . e) with a fresh column solve at every node.  No ODE stepping
    is involved.  Fields built around the nested-cascade construction are
    detected and dispatched to the exact piecewise walker instead.
    """
    if t < 0.0:
        raise ValueError("flows run forward in time")
    z = Point(float(z[0]), float(z[1]))
    dom = b.domain
    if not dom.contains(z.x, z.y):
        raise DomainError(f"start point {z} outside the field domain")

    inner = construction.cascade_inner(b)
    if inner is not None and H is b.stream:
        x1, y1, flag = construction.flow_point(inner, z.x, z.y, float(t))
        if flag == construction.FLOW_OK:
            return FlowOutcome(Point(x1, y1), FLOW_OK, float(t), 0.0)
        segs = construction.walk_strip(inner, z.y, x_from=z.x,
                                       x_to=inner.domain.x_hi)
        used = construction.walk_time(segs, z.x, x1)
        return FlowOutcome(Point(x1, y1), FLOW_EXITED, used,
                           b.sup_norm * (t - used))

    h = float(H.value(z.x, z.y))
    hdom = H.domain
    scale = min(dom.width, dom.height)
    r0 = float(chart_radius) if chart_radius is not None else 0.25 * scale
    tiny_r = 1e-12 * scale
    remaining = float(t)
    elapsed = 0.0
    if remaining == 0.0:
        return FlowOutcome(z, FLOW_OK, 0.0, 0.0)

    for _ in range(max_charts):
        vx, vy = b.velocity(z.x, z.y)
        speed = math.hypot(vx, vy)
        if speed <= 0.0:
            raise TransversalityError(
                f"velocity vanishes at {z}; the level-set chart needs "
                f"a direction of motion")
        e = (vx / speed, vy / speed)
        ex, ey = e
        xi_z = z.x * ex + z.y * ey
        eta_z = -z.x * ey + z.y * ex

        R = r0
        while R > tiny_r:
            corners_ok = all(
                dom.contains(cx, cy) and hdom.contains(cx, cy)
                for cx, cy in (
                    _pt(e, xi_z, eta_z - R), _pt(e, xi_z, eta_z + R),
                    _pt(e, xi_z + R, eta_z - R), _pt(e, xi_z + R, eta_z + R)))
            if not corners_ok:
                R *= 0.5
                continue
            advanced, z, remaining, elapsed = _chart_step(
                H, b, h, e, z, xi_z, eta_z, R, columns, remaining, elapsed)
            if advanced:
                break
            R *= 0.5
        else:
            # Chart collapsed: either the boundary blocks the forward box
            # (a genuine exit) or the curve cannot be charted here.
            d_edge = min(dom.distance_to_boundary(z.x, z.y),
                         hdom.distance_to_boundary(z.x, z.y))
            if d_edge <= 2.0 * tiny_r:
                return FlowOutcome(z, FLOW_EXITED, elapsed,
                                   b.sup_norm * remaining)
            raise TransversalityError(
                f"level-set chart at {z} collapsed below radius {tiny_r} "
                f"away from the boundary")
        if remaining <= 0.0:
            return FlowOutcome(z, FLOW_OK, float(t), 0.0)
    raise ResolutionError(f"chart budget {max_charts} exhausted with "
                          f"t={remaining} still to flow")


def _pt(e, xi, eta):
    ex, ey = e
    return xi * ex - eta * ey, xi * ey + eta * ex


def _chart_step(H, b, h, e, z, xi_z, eta_z, R, columns, remaining, elapsed):
    """One graph-chart advance.  Returns (advanced, z, remaining, elapsed)."""
    eta_lo, eta_hi = eta_z - R, eta_z + R
    xis = np.linspace(xi_z, xi_z + R, columns + 1)
    etas, ok = _solve_columns(H, h, e, xis, eta_lo, eta_hi)
    if not ok[0]:
        return False, z, remaining, elapsed
    run = int(np.argmin(ok)) if not ok.all() else len(ok)
    if run < 2:
        return False, z, remaining, elapsed

    seg_lo, seg_hi = xis[:run - 1], xis[1:run]
    half = 0.5 * (seg_hi - seg_lo)
    mid = 0.5 * (seg_hi + seg_lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    node_eta, node_ok = _solve_columns(H, h, e, nodes.ravel(), eta_lo, eta_hi)
    node_ok = node_ok.reshape(nodes.shape)
    px, py = _chart_points(e, nodes.ravel(), node_eta)
    bx, by = b.velocity_many(px, py)
    bx, by = np.asarray(bx, dtype=float), np.asarray(by, dtype=float)
    s = (bx * e[0] + by * e[1]).reshape(nodes.shape)
    spd = np.hypot(bx, by).reshape(nodes.shape)
    # The clock integrand 1/(b . e) steepens into a square-root blowup at
    # the graph fold where the curve turns perpendicular to e.  Cutting the
    # run once the motion tilts 60 degrees away keeps the integrand smooth
    # on every timed segment; the walk re-anchors e at the cut and carries on.
    good = (node_ok.all(axis=1) & (s > 0.0).all(axis=1)
            & (s >= 0.5 * spd).all(axis=1))
    n_good = int(np.argmin(good)) if not good.all() else len(good)
    if n_good == 0:
        return False, z, remaining, elapsed

    seg_t = half[:n_good] * (_GL_WEIGHTS[None, :] / s[:n_good]).sum(axis=1)
    cum = np.concatenate(([0.0], np.cumsum(seg_t)))
    if cum[-1] >= remaining:
        k = int(np.searchsorted(cum, remaining, side="right")) - 1
        k = min(k, n_good - 1)
        xi_star = _bisect_time(H, b, h, e, float(seg_lo[k]), float(seg_hi[k]),
                               eta_lo, eta_hi, remaining - float(cum[k]))
        eta_star, ok_star = _solve_columns(H, h, e, np.array([xi_star]),
                                           eta_lo, eta_hi)
        if not ok_star[0]:
            raise NumericalError("final column lost its level bracket")
        zx, zy = _pt(e, xi_star, float(eta_star[0]))
        return True, Point(zx, zy), 0.0, elapsed + remaining
    # Advance to the last fully-timed column and chart again from there.
    zx, zy = _pt(e, float(xis[n_good]), float(etas[n_good]))
    return True, Point(zx, zy), remaining - float(cum[-1]), elapsed + float(cum[-1])


def _bisect_time(H, b, h, e, xi_a, xi_b, eta_lo, eta_hi, need):
    """xi in [xi_a, xi_b] at which the travel time from xi_a equals need."""

    def leg(xi):
        half = 0.5 * (xi - xi_a)
        nodes = 0.5 * (xi + xi_a) + half * _GL_NODES
        etas, ok = _solve_columns(H, h, e, nodes, eta_lo, eta_hi)
        if not ok.all():
            raise NumericalError("level bracket lost inside a timed segment")
        px, py = _chart_points(e, nodes, etas)
        bx, by = b.velocity_many(px, py)
        s = np.asarray(bx) * e[0] + np.asarray(by) * e[1]
        if (s <= 0.0).any():
            raise TransversalityError("b . e changed sign inside a "
                                      "timed segment")
        return half * float((_GL_WEIGHTS / s).sum())

    lo, hi = xi_a, xi_b
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if leg(mid) < need:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def levelset_flow(H: ScalarField, b: PlanarField, z: Point, t: float,
                  chart_radius: Optional[float] = None,
                  columns: int = 128) -> Point:
    out = levelset_flow_ex(H, b, z, t, chart_radius=chart_radius,
                           columns=columns)
    if out.flag == FLOW_EXITED:
        raise DomainError(f"trajectory from {z} left the domain at "
                          f"t={out.t_reached}")
    if out.flag != FLOW_OK:
        raise NumericalError(f"level-set walk stalled (flag {out.flag})")
    return out.point


# ---------------------------------------------------------------------------
# whole-window flow maps

MAP_OK = 0
MAP_UNDERFLOW = 1
MAP_EXITED = 2
MAP_ERROR = 3


@dataclass(frozen=True)
class FlowMap:
    """Images of a regular grid of start points under the time-t flow."""
    origin: Point
    spacing: Tuple[float, float]
    nx: int
    ny: int
    t: float
    method: str
    images: np.ndarray          # (ny, nx, 2)
    flags: np.ndarray           # (ny, nx) int8, MAP_* codes

    def node(self, ix: int, iy: int) -> Point:
        return Point(self.origin.x + ix * self.spacing[0],
                     self.origin.y + iy * self.spacing[1])

    def component(self, axis: int) -> np.ndarray:
        return self.images[:, :, axis]

    def csv_rows(self) -> Iterator[Tuple]:
        for iy in range(self.ny):
            for ix in range(self.nx):
                p = self.node(ix, iy)
                q = self.images[iy, ix]
                yield (ix, iy, p.x, p.y, float(q[0]), float(q[1]),
                       int(self.flags[iy, ix]))


def flow_map(b: PlanarField, H: Optional[ScalarField], t: float,
             window: AxisRect, n: int, method: str = "rk",
             tol: float = 1e-9) -> FlowMap:
    """Flow the (n+1) x (n+1) grid of window nodes for time t.

    method "rk" uses the batched integrator; "levelset" walks every node
    along its level curve.  Failures are recorded per node in flags, never
    raised, so a single separatrix cannot abort a whole map.
    """
    if n < 1:
        raise ValueError("the grid needs at least one cell per side")
    xs = np.linspace(window.x_lo, window.x_hi, n + 1)
    ys = np.linspace(window.y_lo, window.y_hi, n + 1)
    origin = Point(window.x_lo, window.y_lo)
    spacing = (float(xs[1] - xs[0]), float(ys[1] - ys[0]))
    gx, gy = np.meshgrid(xs, ys)
    if method == "rk":
        pts = np.stack((gx.ravel(), gy.ravel()), axis=1)
        img, flags = rk_flow_many(b, pts, t, tol=tol)
        images = img.reshape(n + 1, n + 1, 2)
        fl = flags.reshape(n + 1, n + 1)
    elif method == "levelset":
        if H is None:
            H = b.stream
        if H is None:
            raise ValueError("the level-set method needs a streamfunction")
        images = np.zeros((n + 1, n + 1, 2))
        fl = np.zeros((n + 1, n + 1), dtype=np.int8)
        code = {FLOW_OK: MAP_OK, FLOW_UNDERFLOW: MAP_UNDERFLOW,
                FLOW_EXITED: MAP_EXITED}
        for iy in range(n + 1):
            for ix in range(n + 1):
                zp = Point(float(gx[iy, ix]), float(gy[iy, ix]))
                try:
                    out = levelset_flow_ex(H, b, zp, t)
                    images[iy, ix] = out.point
                    fl[iy, ix] = code[out.flag]
                except (DomainError, TransversalityError, ResolutionError,
                        NumericalError):
                    images[iy, ix] = zp
                    fl[iy, ix] = MAP_ERROR
    else:
        raise ValueError(f"unknown flow method {method!r}")
    return FlowMap(origin=origin, spacing=spacing, nx=n + 1, ny=n + 1,
                   t=float(t), method=method, images=images, flags=fl)


@dataclass(frozen=True)
class CompressibilityReport:
    max_ratio: float
    min_ratio: float
    cells: int
    excluded: int


def compressibility_check(fm: FlowMap) -> CompressibilityReport:
    """Area distortion of the grid cells under the flow map.

    For each cell the image quadrilateral area (shoelace) is compared with
    the source cell area; for a divergence-free flow both ratios stay near
    one.  Cells touching a failed node, or collapsed to below 1e-12 of
    their source area, are excluded and counted.
    """
    a = fm.images
    v0 = a[:-1, :-1]
    v1 = a[:-1, 1:]
    v2 = a[1:, 1:]
    v3 = a[1:, :-1]
    signed = 0.5 * (
        v0[..., 0] * (v1[..., 1] - v3[..., 1])
        + v1[..., 0] * (v2[..., 1] - v0[..., 1])
        + v2[..., 0] * (v3[..., 1] - v1[..., 1])
        + v3[..., 0] * (v0[..., 1] - v2[..., 1]))
    cell = fm.spacing[0] * fm.spacing[1]
    bad_flag = (fm.flags[:-1, :-1] | fm.flags[:-1, 1:]
                | fm.flags[1:, 1:] | fm.flags[1:, :-1]) != 0
    degenerate = np.abs(signed) < 1e-12 * cell
    keep = ~(bad_flag | degenerate)
    cells = int(keep.size)
    excluded = int(cells - keep.sum())
    if keep.any():
        ratios = cell / np.abs(signed[keep])
        return CompressibilityReport(float(ratios.max()), float(ratios.min()),
                                     cells, excluded)
    return CompressibilityReport(math.nan, math.nan, cells, excluded)


# ---------------------------------------------------------------------------
# crossing clocks for the cascade construction

@dataclass(frozen=True)
class CrossingTimes:
    """Arrival clock of the horizontal crossing started at (-1, y)."""
    y: float
    t_enter: float      # time to reach x = 0
    t_exit: float       # time to reach x = 1

    @property
    def transit(self) -> float:
        return self.t_exit - self.t_enter


def crossing_times(b: PlanarField,
                   y_values: Sequence[float]) -> List[CrossingTimes]:
    """Crossing clocks T(y) for a cascade-backed field.

    Walks the level line through (-1, y) and times the legs to x = 0 and
    to x = 1.  Heights caught inside the construction raise
    ResolutionError rather than returning a fake time.
    """
    inner = construction.cascade_inner(b)
    if inner is None:
        raise ValueError("crossing times are defined for cascade-backed "
                         "fields; build one with build_velocity")
    out = []
    for y in y_values:
        segs = construction.walk_strip(inner, float(y), x_from=-1.0, x_to=1.0)
        t1 = construction.walk_time(segs, -1.0, 0.0)
        t2 = construction.walk_time(segs, -1.0, 1.0)
        out.append(CrossingTimes(float(y), t1, t2))
    return out
