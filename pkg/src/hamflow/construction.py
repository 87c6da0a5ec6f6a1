"""The nested-cascade scalar profile and its crossing-time laboratory.

The profile f starts from f(x, y) = y and is refined generation by
generation inside the component tree of :mod:`hamflow.cascade`.  Inside a
generation-n component with floor value ``base`` and incoming slope
``w = v_{n-1}``:

* the two outer vertical bands keep the incoming affine profile
  ``base + w (y - floor)``;
* the six column rows are affine in y with slopes v_n (blocks) and
  v'_n (channels), stacked to spend the exact oscillation budget s_n;
* the two fan strips interpolate: each row boundary maps to a straight
  segment from its band-side height to its column-side height, and each of
  the six resulting trapezoids is split along one diagonal into two affine
  triangles (column-side triangle carries the row slope, band-side triangle
  carries w).  Level lines inside a fan are parallel to these segments, and
  the steepest has slope (c_n - 8 a_n)/(8 a_n) for n >= 2.

The induced velocity is b = (df/dy, -df/dx): divergence-free, rightward
(df/dy > 0 everywhere), and trajectories are exactly the level lines of f.
Crossing times through the strip 0 <= x <= 1 are computed two independent
ways: a recursive exact tracer over the rational scalars, and a float
cell-hopping walker over the built field.  Both integrate the true ODE path
piece by piece; the field is piecewise affine, so both are quadrature-free.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import cascade
from .errors import DomainError, ResolutionError
from .fields import PlanarField, ScalarField, Transversality
from .geometry import AxisRect

ROW_NAMES = ("E1", "D1", "E2", "E3", "D2", "E4")
_BLOCK_ROWS = (1, 4)  # rows holding the two blocks (and their child squares)

DOMAIN = AxisRect(-2.0, 3.0, -1.0, 2.0)


# ---------------------------------------------------------------------------
# exact per-generation scalars used by both evaluation and tracing

@dataclass(frozen=True)
class _GenScalars:
    n: int
    c: Fraction
    a: Fraction
    r: Fraction
    q: Fraction
    w: Fraction          # incoming slope v_{n-1} (v_0 = 1)
    s: Fraction
    u: Tuple[Fraction, ...]
    rho: Tuple[Fraction, ...]


@lru_cache(maxsize=None)
def _gen(n: int) -> _GenScalars:
    a, r = cascade.geometry_margins(n)
    v = cascade.slow_speed(n)
    vp = cascade.fast_speed(n)
    return _GenScalars(
        n=n,
        c=cascade.component_side(n),
        a=a,
        r=r,
        q=cascade.column_width(n),
        w=Fraction(1) if n == 1 else cascade.slow_speed(n - 1),
        s=cascade.oscillation(n),
        u=cascade.channel_fractions(n),
        rho=(vp, v, vp, vp, v, vp),
    )


# ---------------------------------------------------------------------------
# float evaluation tree

@dataclass(frozen=True)
class _CompEval:
    """Float-converted data of one component, for fast point evaluation."""

    n: int
    path: Tuple[int, ...]
    xs: Tuple[float, ...]       # 6 vertical cuts
    ys: Tuple[float, ...]       # 7 row boundaries
    band_ys: Tuple[float, ...]  # heights of the row boundaries at the band edges
    base: float                 # f at the component floor
    w: float
    s: float
    u: Tuple[float, ...]
    rho: Tuple[float, ...]
    child_rects: Tuple[Tuple[float, float, float, float], ...]
    child_idx: Optional[Tuple[int, int]]


@dataclass(frozen=True)
class RegionInfo:
    """Where a point sits in the cascade structure."""

    level: int
    path: Tuple[int, ...]
    kind: str         # outside | band | fan | row
    row: Optional[int]
    detail: str

    @property
    def region_id(self) -> str:
        tag = "".join(str(b) for b in self.path)
        return f"n{self.level}[{tag}]:{self.kind}:{self.detail}"


class CascadeField(ScalarField):
    """Piecewise-affine cascade profile truncated at a finite generation.

    Evaluation descends the component tree; points on cell seams resolve
    with the right/upper half-open rule, matching the forward-in-time limit
    of the induced rightward flow.
    """

    def __init__(self, depth: int):
        if depth < 1:
            raise ValueError("build at least one generation")
        self.depth = depth
        self.domain = DOMAIN
        self.tree = cascade.build_tree(depth)
        self._levels: List[List[_CompEval]] = []
        self._exact_bases: List[List[Fraction]] = []
        self._build_eval_tables()
        self.lipschitz_bound = self.sup_gradient_norm()

    # -- construction ------------------------------------------------------

    def _build_eval_tables(self):
        bases: List[List[Fraction]] = [[Fraction(0)]]
        for n in range(1, self.depth + 1):
            g = _gen(n)
            # every generation must spend its oscillation budget exactly
            spent = 2 * cascade.block_oscillation(n) + 4 * cascade.channel_oscillation(n)
            if spent != g.s:
                raise AssertionError(f"oscillation budget broken at generation {n}")
            comps = self.tree.components(n)
            level_eval: List[_CompEval] = []
            next_bases: List[Fraction] = []
            for i, geom in enumerate(comps):
                base = bases[n - 1][i]
                band_ys = tuple(geom.y_breaks[0] + (g.s * uk) / g.w for uk in g.u)
                child_idx = (2 * i, 2 * i + 1) if n < self.depth else None
                level_eval.append(_CompEval(
                    n=n, path=geom.path,
                    xs=tuple(float(v) for v in geom.x_breaks),
                    ys=tuple(float(v) for v in geom.y_breaks),
                    band_ys=tuple(float(v) for v in band_ys),
                    base=float(base), w=float(g.w), s=float(g.s),
                    u=tuple(float(v) for v in g.u),
                    rho=tuple(float(v) for v in g.rho),
                    child_rects=tuple(
                        tuple(float(v) for v in rc.as_tuple()) for rc in geom.children),
                    child_idx=child_idx,
                ))
                for k0 in _BLOCK_ROWS:
                    next_bases.append(base + g.s * g.u[k0] + g.rho[k0] * g.r)
            self._levels.append(level_eval)
            self._exact_bases.append(bases[n - 1])
            bases.append(next_bases)

    # -- region lookup -----------------------------------------------------

    def _descend(self, x: float, y: float) -> Optional[_CompEval]:
        root = self._levels[0][0]
        if not (root.xs[0] <= x < root.xs[5] and root.ys[0] <= y < root.ys[6]):
            return None
        comp = root
        while comp.child_idx is not None:
            nxt = None
            for j in (0, 1):
                xl, xh, yl, yh = comp.child_rects[j]
                if xl <= x < xh and yl <= y < yh:
                    nxt = self._levels[comp.n][comp.child_idx[j]]
                    break
            if nxt is None:
                return comp
            comp = nxt
        return comp

    def _region(self, x: float, y: float):
        """(comp, kind, data) with kind in outside/band/row/fan."""
        comp = self._descend(x, y)
        if comp is None:
            return None, "outside", None
        xs = comp.xs
        if x < xs[1] or x >= xs[4]:
            return comp, "band", (0 if x < xs[1] else 1)
        if xs[2] <= x < xs[3]:
            k = bisect_right(comp.ys, y) - 1
            k = min(max(k, 0), 5)
            return comp, "row", k
        side = 0 if x < xs[2] else 1
        a = xs[2] - xs[1]
        xi = (x - xs[1]) / a if side == 0 else (xs[4] - x) / a
        # boundary-segment heights at this cross-fan position
        k = 0
        for kk in range(6):
            g_hi = (1.0 - xi) * comp.band_ys[kk + 1] + xi * comp.ys[kk + 1]
            if y < g_hi:
                k = kk
                break
        else:
            k = 5
        diag = (1.0 - xi) * comp.band_ys[k] + xi * comp.ys[k + 1]
        tri = 2 if y >= diag else 1  # band-side triangle 2 carries slope w
        return comp, "fan", (side, k, tri, xi)

    def locate(self, x: float, y: float) -> RegionInfo:
        self.check_domain(x, y)
        comp, kind, data = self._region(x, y)
        if kind == "outside":
            return RegionInfo(0, (), "outside", None, "ambient")
        if kind == "band":
            return RegionInfo(comp.n, comp.path, "band",
                              None, "left" if data == 0 else "right")
        if kind == "row":
            return RegionInfo(comp.n, comp.path, "row", data, ROW_NAMES[data])
        side, k, tri, _ = data
        name = f"{'left' if side == 0 else 'right'}-trap{k}-t{tri}"
        return RegionInfo(comp.n, comp.path, "fan", k, name)

    # -- evaluation --------------------------------------------------------

    def _eval(self, x: float, y: float):
        comp, kind, data = self._region(x, y)
        if kind == "outside":
            return y, 0.0, 1.0
        if kind == "band":
            return comp.base + comp.w * (y - comp.ys[0]), 0.0, comp.w
        if kind == "row":
            k = data
            val = comp.base + comp.s * comp.u[k] + comp.rho[k] * (y - comp.ys[k])
            return val, 0.0, comp.rho[k]
        side, k, tri, xi = data
        a = comp.xs[2] - comp.xs[1]
        dxi = 1.0 / a if side == 0 else -1.0 / a
        if tri == 1:
            # column-side triangle: level lines parallel to the k-th segment
            g_lo = (1.0 - xi) * comp.band_ys[k] + xi * comp.ys[k]
            seg_slope = (comp.ys[k] - comp.band_ys[k]) * dxi
            val = comp.base + comp.s * comp.u[k] + comp.rho[k] * (y - g_lo)
            return val, -comp.rho[k] * seg_slope, comp.rho[k]
        g_hi = (1.0 - xi) * comp.band_ys[k + 1] + xi * comp.ys[k + 1]
        seg_slope = (comp.ys[k + 1] - comp.band_ys[k + 1]) * dxi
        val = comp.base + comp.s * comp.u[k + 1] + comp.w * (y - g_hi)
        return val, -comp.w * seg_slope, comp.w

    def value(self, x: float, y: float) -> float:
        self.check_domain(x, y)
        return self._eval(x, y)[0]

    def gradient(self, x: float, y: float):
        self.check_domain(x, y)
        _, gx, gy = self._eval(x, y)
        return gx, gy

    # -- worst-case slopes -------------------------------------------------

    def sup_gradient_norm(self) -> float:
        worst = 1.0  # ambient profile f = y
        for n in range(1, self.depth + 1):
            worst = max(worst, float(fast_slope_norm(n)))
        return worst

    def min_vertical_slope(self) -> Fraction:
        """Exact lower bound of df/dy over the whole plane (slowest block)."""
        return cascade.slow_speed(self.depth)


def fan_level_slope(n: int) -> Fraction:
    """Steepest level-line slope inside generation-n fans (exact)."""
    return max(abs(seg.ys_slope) for seg in _fan_segments(n))


@dataclass(frozen=True)
class _FanSegment:
    k: int
    ys_slope: Fraction  # column-side height minus band-side height, per unit width


@lru_cache(maxsize=None)
def _fan_segments(n: int) -> Tuple[_FanSegment, ...]:
    g = _gen(n)
    heights = [Fraction(0)]
    for k in range(6):
        heights.append(heights[-1] + (g.a, g.q, g.a, g.a, g.q, g.a)[k])
    out = []
    for k in range(7):
        band = g.s * g.u[k] / g.w
        out.append(_FanSegment(k=k, ys_slope=(heights[k] - band) / g.a))
    return tuple(out)


def fast_slope_norm(n: int):
    """sup |grad f| over generation-n structure: channel slope times the
    fan direction factor sqrt(1 + slope^2)."""
    sl = float(fan_level_slope(n))
    return float(cascade.fast_speed(n)) * math.sqrt(1.0 + sl * sl)


# ---------------------------------------------------------------------------
# public builders

@lru_cache(maxsize=None)
def build_field(depth: int) -> CascadeField:
    """The cascade profile truncated after ``depth`` generations."""
    return CascadeField(depth)


class _NegatedField(ScalarField):
    """Streamfunction wrapper H = -f, so the induced velocity runs rightward."""

    def __init__(self, inner: ScalarField):
        self.inner = inner
        self.domain = inner.domain
        self.lipschitz_bound = inner.lipschitz_bound

    def value(self, x, y):
        return -self.inner.value(x, y)

    def gradient(self, x, y):
        gx, gy = self.inner.gradient(x, y)
        return -gx, -gy

    def value_many(self, xs, ys):
        return -self.inner.value_many(xs, ys)

    def gradient_many(self, xs, ys):
        gx, gy = self.inner.gradient_many(xs, ys)
        return -gx, -gy


@lru_cache(maxsize=None)
def build_velocity(depth: int) -> PlanarField:
    """Divergence-free velocity whose trajectories are the profile's level
    lines, moving rightward at speed df/dy."""
    f = build_field(depth)
    delta = float(f.min_vertical_slope())
    return PlanarField(stream=_NegatedField(f),
                       sup_norm=f.sup_gradient_norm(),
                       transversality=Transversality((1.0, 0.0), delta, f.domain),
                       regularity_tag="piecewise-affine",
                       name=f"cascade-{depth}")


def cascade_inner(b) -> Optional[CascadeField]:
    """The CascadeField behind a velocity from build_velocity, else None."""
    stream = getattr(b, "stream", None)
    if isinstance(stream, _NegatedField) and isinstance(stream.inner, CascadeField):
        return stream.inner
    return None


# ---------------------------------------------------------------------------
# exact tracer: crossing times as Fractions

def component_time_exact(n: int, tau: Fraction, depth: int) -> Fraction:
    """Exact horizontal crossing time of a generation-n component.

    ``tau`` is the entry fraction of the component's oscillation (0 at the
    floor, 1 at the ceiling); boundary values resolve upward, matching the
    field's half-open seams.  ``depth`` is the built truncation generation:
    blocks at generation ``depth`` are crossed flat, without descending.
    """
    if not 0 <= tau < 1:
        raise ValueError(f"entry fraction must lie in [0, 1), got {tau}")
    g = _gen(n)
    k = 0
    for kk in range(5, -1, -1):
        if tau >= g.u[kk]:
            k = kk
            break
    tau_rel = (tau - g.u[k]) / (g.u[k + 1] - g.u[k])
    rho = g.rho[k]
    t = g.c / (2 * g.w)                                  # two outer bands
    t += 2 * g.a * (tau_rel / g.w + (1 - tau_rel) / rho)  # two fans
    if k in _BLOCK_ROWS and n < depth:
        hit = tau_rel * g.q  # entry height within the block
        lo, hi = g.r, g.q - g.r
        if lo <= hit < hi:
            tau_child = (hit - lo) / cascade.component_side(n + 1)
            return t + 2 * g.r / rho + component_time_exact(n + 1, tau_child, depth)
    return t + g.q / rho


def strip_time_exact(y, depth: int) -> Fraction:
    """Exact crossing time of the strip 0 <= x <= 1 at starting height y.

    Outside the construction's influence the profile is the ambient f = y
    and the crossing takes exactly 1.
    """
    y = Fraction(y)
    s1 = cascade.oscillation(1)
    if not 0 <= y < s1:
        return Fraction(1)
    # half the strip is spent outside the root square (speed 1)
    return Fraction(1, 2) + component_time_exact(1, y / s1, depth)


# ---------------------------------------------------------------------------
# witness heights

def deepest_fraction(kind: str, n: int) -> Fraction:
    """Center entry fraction of the target row at the deepest generation."""
    u = _gen(n).u
    if kind == "fast":
        return (u[2] + u[3]) / 2   # center of the lower upper-channel row
    if kind == "slow":
        return (u[1] + u[2]) / 2   # center of the lower block row
    raise ValueError(f"unknown witness kind {kind!r}")


def witness_fractions(path: Tuple[int, ...], kind: str) -> List[Fraction]:
    """Per-generation entry fractions of the witness threading ``path``.

    Element l-1 is the entry fraction into the generation-l component; the
    deepest entry (generation len(path)+1) sits at the center of the target
    row, and upstream fractions are forced by the nesting geometry.
    """
    n = len(path) + 1
    taus = [deepest_fraction(kind, n)]
    for l in range(n - 1, 0, -1):
        g = _gen(l)
        k0 = _BLOCK_ROWS[path[l - 1]]
        hit = taus[0] * cascade.component_side(l + 1) + g.r
        tau_rel = hit / g.q
        taus.insert(0, g.u[k0] + tau_rel * (g.u[k0 + 1] - g.u[k0]))
    return taus


def witness_height(path: Tuple[int, ...], kind: str) -> Fraction:
    """Starting height whose level line threads ``path`` and crosses the
    deepest component at the target row's center."""
    return witness_fractions(path, kind)[0] * cascade.oscillation(1)


def all_witness_heights(depth: int, kind: str) -> List[Fraction]:
    """Witness heights of every generation-``depth`` component, ascending."""
    import itertools
    ys = [witness_height(p, kind)
          for p in itertools.product((0, 1), repeat=depth - 1)]
    return sorted(ys)


# ---------------------------------------------------------------------------
# float walker: cell-hopping along the actual trajectory

@dataclass(frozen=True)
class WalkSegment:
    x0: float
    x1: float
    speed: float  # horizontal speed through this piece


def _hop(field: CascadeField, x: float, yy: float):
    """Exit position, horizontal speed and level-line slope of the affine
    cell at (x, yy).

    The exit is the cell boundary the rightward level line hits next
    (math.inf in the ambient region once past the construction).
    """
    comp, kind, data = field._region(x, yy)
    if kind == "outside":
        root = field._levels[0][0]
        if x < root.xs[0] and root.ys[0] <= yy < root.ys[6]:
            return root.xs[0], 1.0, 0.0
        return math.inf, 1.0, 0.0
    if kind == "band":
        return (comp.xs[1] if data == 0 else comp.xs[5]), comp.w, 0.0
    if kind == "row":
        k = data
        x_next = comp.xs[3]
        if comp.child_idx is not None and k in _BLOCK_ROWS:
            j = _BLOCK_ROWS.index(k)
            xl, _, ylo, yhi = comp.child_rects[j]
            if ylo <= yy < yhi and x < xl:
                x_next = xl
        return x_next, comp.rho[k], 0.0
    # fan: two affine pieces separated by the trapezoid diagonal
    side, k, tri, xi = data
    a = comp.xs[2] - comp.xs[1]
    band_edge = comp.xs[1] if side == 0 else comp.xs[4]
    col_edge = comp.xs[2] if side == 0 else comp.xs[3]
    dxi = 1.0 / a if side == 0 else -1.0 / a
    # current level fraction within the trapezoid, from the piece formulas
    du = comp.u[k + 1] - comp.u[k]
    if tri == 2:
        g_hi = (1.0 - xi) * comp.band_ys[k + 1] + xi * comp.ys[k + 1]
        tau_rel = 1.0 + comp.w * (yy - g_hi) / (comp.s * du)
    else:
        g_lo = (1.0 - xi) * comp.band_ys[k] + xi * comp.ys[k]
        tau_rel = comp.rho[k] * (yy - g_lo) / (comp.s * du)
    xi_star = min(max(tau_rel, 0.0), 1.0)  # diagonal crossing position
    x_star = band_edge + xi_star * (col_edge - band_edge)
    if side == 0:
        # enter at band side in triangle 2, cross to triangle 1 at x_star
        w_piece = tri == 2 and x < x_star
        x_next = x_star if w_piece else col_edge
    else:
        # enter at column side in triangle 1, cross at x_star, exit at band
        w_piece = not (tri == 1 and x < x_star)
        x_next = band_edge if w_piece else x_star
    if w_piece:
        speed = comp.w
        level_slope = (comp.ys[k + 1] - comp.band_ys[k + 1]) * dxi
    else:
        speed = comp.rho[k]
        level_slope = (comp.ys[k] - comp.band_ys[k]) * dxi
    return x_next, speed, level_slope


def walk_strip(field: CascadeField, y: float, x_from: float = 0.0,
               x_to: float = 1.0, max_hops: int = 200_000) -> List[WalkSegment]:
    """Trace the trajectory through [x_from, x_to] starting at height y.

    The velocity is constant on every affine cell, so the trajectory is a
    polyline; each hop advances to the next cell boundary along the current
    level line and the crossing time of a piece is width / speed.
    """
    segs: List[WalkSegment] = []
    x, yy = x_from, y
    for _ in range(max_hops):
        if x >= x_to:
            return segs
        x_exit, speed, level_slope = _hop(field, x, yy)
        x_next = min(x_to, x_exit)
        if x_next <= x:  # seam-rounding guard: force minimal forward progress
            x_next = np.nextafter(x, math.inf)
        segs.append(WalkSegment(x, x_next, speed))
        yy += level_slope * (x_next - x)
        x = x_next
    raise ResolutionError("walker exceeded its hop budget")


FLOW_OK = "ok"
FLOW_EXITED = "exited"


def flow_point(field: CascadeField, x: float, y: float, t: float,
               max_hops: int = 200_000):
    """Forward flow for time t of the velocity induced by the profile.

    Same cell walk as walk_strip but budgeted by time instead of horizontal
    extent; per-cell times are exact divisions, so the profile value along
    the path is conserved to rounding.  Returns (x1, y1, flag); "exited"
    means the path hit the domain's right edge with time to spare and the
    returned point sits on that edge.
    """
    if t < 0:
        raise ValueError("flow runs forward in time")
    field.check_domain(x, y)
    x_hi = field.domain.x_hi
    remaining = float(t)
    for _ in range(max_hops):
        x_exit, speed, level_slope = _hop(field, x, y)
        if x_exit <= x:  # seam-rounding guard: force minimal forward progress
            x_exit = np.nextafter(x, math.inf)
        dt = (min(x_exit, x_hi) - x) / speed
        if dt >= remaining:
            dx = speed * remaining
            return x + dx, y + level_slope * dx, FLOW_OK
        if x_exit >= x_hi:
            return x_hi, y + level_slope * (x_hi - x), FLOW_EXITED
        y += level_slope * (x_exit - x)
        x = x_exit
        remaining -= dt
    raise ResolutionError("flow walker exceeded its hop budget")


def walk_time(segs: Sequence[WalkSegment], xa: float, xb: float) -> float:
    """Crossing time of [xa, xb] from a walked trajectory's pieces."""
    t = 0.0
    for s in segs:
        lo, hi = max(s.x0, xa), min(s.x1, xb)
        if hi > lo:
            t += (hi - lo) / s.speed
    return t


# ---------------------------------------------------------------------------
# gradient-jump edges: the singular part of the derivative, exactly

@dataclass(frozen=True)
class JumpEdge:
    """One straight gradient-jump edge of the profile.

    delta is the gradient jump across the edge, the limit from the side nu
    points into minus the limit from the other side; the profile itself is
    continuous, with values f0 and f1 at the endpoints (affine between), so
    edge mass can be sliced by level exactly.
    """
    level: int
    p0: Tuple[float, float]
    p1: Tuple[float, float]
    delta: Tuple[float, float]
    nu: Tuple[float, float]
    f0: float
    f1: float

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def jump_norm(self) -> float:
        return math.hypot(self.delta[0], self.delta[1])

    @property
    def mass(self) -> float:
        return self.length * self.jump_norm


def _component_jump_edges(n: int, geom, base: Fraction) -> List[JumpEdge]:
    """Every jump edge a single generation-n component contributes.

    All interfaces of the affine cells are enumerated with exact rational
    data: band|fan and fan|column verticals, the trapezoid diagonals, the
    interior fan segments, floor and ceiling, and the column row interfaces.
    The component's outer sides and its children's band edges are continuous
    in gradient (the refinement identity s = w*c), so they carry no edge.
    """
    g = _gen(n)
    X, Y = geom.x_breaks, geom.y_breaks
    a = X[2] - X[1]
    w, rho, s = g.w, g.rho, g.s
    band = tuple(Y[0] + s * uk / w for uk in g.u)
    fk = [base + s * uk for uk in g.u]
    m = [(Y[k] - band[k]) / a for k in range(7)]  # left-fan segment slopes

    edges: List[JumpEdge] = []

    def emit(p0, p1, delta, nu, f0, f1):
        nrm = math.hypot(float(nu[0]), float(nu[1]))
        edges.append(JumpEdge(
            level=n,
            p0=(float(p0[0]), float(p0[1])),
            p1=(float(p1[0]), float(p1[1])),
            delta=(float(delta[0]), float(delta[1])),
            nu=(float(nu[0]) / nrm, float(nu[1]) / nrm),
            f0=float(f0), f1=float(f1)))

    def up_normal(dx, dy):
        # unit normal with positive vertical part (these edges are never vertical)
        return (-dy, dx) if dx > 0 else (dy, -dx)

    for k in range(6):
        # band|fan verticals; the mirror symmetry makes both jumps equal
        if m[k + 1] != 0:
            d = (-w * m[k + 1], 0)
            emit((X[1], band[k]), (X[1], band[k + 1]), d, (1, 0), fk[k], fk[k + 1])
            emit((X[4], band[k]), (X[4], band[k + 1]), d, (1, 0), fk[k], fk[k + 1])
        # fan|column verticals
        if m[k] != 0:
            d = (rho[k] * m[k], 0)
            emit((X[2], Y[k]), (X[2], Y[k + 1]), d, (1, 0), fk[k], fk[k + 1])
            emit((X[3], Y[k]), (X[3], Y[k + 1]), d, (1, 0), fk[k], fk[k + 1])
        # trapezoid diagonals, band-side bottom corner to column-side top corner
        dl = (rho[k] * m[k] - w * m[k + 1], w - rho[k])
        dr = (w * m[k + 1] - rho[k] * m[k], w - rho[k])
        emit((X[1], band[k]), (X[2], Y[k + 1]), dl,
             up_normal(float(X[2] - X[1]), float(Y[k + 1] - band[k])), fk[k], fk[k + 1])
        emit((X[4], band[k]), (X[3], Y[k + 1]), dr,
             up_normal(float(X[3] - X[4]), float(Y[k + 1] - band[k])), fk[k], fk[k + 1])
    # interior fan segments: fast piece of trapezoid k above, slow piece of k-1 below
    for k in range(1, 6):
        dl = ((w - rho[k]) * m[k], rho[k] - w)
        dr = ((rho[k] - w) * m[k], rho[k] - w)
        emit((X[1], band[k]), (X[2], Y[k]), dl,
             up_normal(float(X[2] - X[1]), float(Y[k] - band[k])), fk[k], fk[k])
        emit((X[4], band[k]), (X[3], Y[k]), dr,
             up_normal(float(X[3] - X[4]), float(Y[k] - band[k])), fk[k], fk[k])
    # floor spans fan and column range; ceiling jumps only across the column
    emit((X[1], Y[0]), (X[4], Y[0]), (0, rho[0] - w), (0, 1), base, base)
    emit((X[2], Y[6]), (X[3], Y[6]), (0, w - rho[5]), (0, 1), base + s, base + s)
    for k in range(1, 6):
        if rho[k] != rho[k - 1]:
            emit((X[2], Y[k]), (X[3], Y[k]), (0, rho[k] - rho[k - 1]), (0, 1),
                 fk[k], fk[k])
    return edges


def jump_edges(field: CascadeField) -> Tuple[JumpEdge, ...]:
    """All gradient-jump edges of the field's profile, every generation.

    Deeper structure lives strictly inside child squares, a positive margin
    away from any shallower edge, so each edge's jump and profile values are
    final once its generation is built.
    """
    cached = getattr(field, "_jump_edges", None)
    if cached is not None:
        return cached
    out: List[JumpEdge] = []
    for n in range(1, field.depth + 1):
        comps = field.tree.components(n)
        for geom, base in zip(comps, field._exact_bases[n - 1]):
            out.extend(_component_jump_edges(n, geom, base))
    field._jump_edges = tuple(out)
    return field._jump_edges


def generation_jump_edges(level: int) -> Tuple[JumpEdge, ...]:
    """Jump edges introduced by one generation (those of the increment
    f_level - f_{level-1}, which is affine across every shallower edge)."""
    return tuple(e for e in jump_edges(build_field(level)) if e.level == level)


def critical_levels(depth: int) -> List[float]:
    """Profile values of every built row boundary, negated to match the
    streamfunction sign.

    The minimum speed along a level line changes exactly when the level
    crosses a row boundary of some component, so a decomposition sampler
    that includes these levels misses no speed band.
    """
    f = build_field(depth)
    vals = set()
    for n in range(1, depth + 1):
        g = _gen(n)
        for base in f._exact_bases[n - 1]:
            for uk in g.u:
                vals.add(-(base + g.s * uk))
    return sorted(float(v) for v in vals)


# ---------------------------------------------------------------------------
# crossing ladders

@dataclass(frozen=True)
class CrossingLadder:
    """Per-generation transit times of the component anatomy.

    T1[n]: time across a generation-n square's width inside its parent
    block, before refinement (speed v_{n-1}).  Ts[n]/Tf[n]: full component
    crossings entered at the center of the lower block row / lower upper
    channel row.  T[n]: strip crossing of the depth-n field at the fast
    witness, assembled by the telescoping identity.  Indexing is by
    generation: T1[1] is index 0.
    """

    n_max: int
    method: str
    T1: tuple
    Ts: tuple
    Tf: tuple
    T: tuple
    sigma_partials: tuple

    def as_rows(self):
        rows = []
        for i in range(self.n_max):
            rows.append((i + 1, self.T1[i], self.Ts[i], self.Tf[i], self.T[i],
                         self.sigma_partials[i]))
        return rows


def _ladder_T1(n: int) -> Fraction:
    w = Fraction(1) if n == 1 else cascade.slow_speed(n - 1)
    return cascade.component_side(n) / w


def _ladder_Ts(n: int) -> Fraction:
    g = _gen(n)
    return g.c / (2 * g.w) + g.a / g.w + (g.a + g.q) / cascade.slow_speed(n)


def _ladder_Tf(n: int) -> Fraction:
    g = _gen(n)
    return g.c / (2 * g.w) + g.a / g.w + (g.a + g.q) / cascade.fast_speed(n)


def _assemble_T(T1: Sequence, Ts: Sequence, Tf: Sequence, n_max: int):
    entry = Fraction(1, 2) if isinstance(Ts[0], Fraction) else 0.5
    T = [entry + Ts[0]]
    for n in range(2, n_max + 1):
        middle = sum(Ts[l - 1] - T1[l - 1] for l in range(2, n))
        T.append(T[0] + middle + Tf[n - 1] - T1[n - 1])
    return tuple(T)


def crossing_ladder(n_max: int, method: str = "analytic") -> CrossingLadder:
    """Transit-time ladder, by closed-form anatomy or by walked trajectories.

    The trajectory method builds the depth-n field for each generation and
    measures segment times of actual walked level lines: component entry to
    exit for Ts/Tf (witness starts), and the pre-refinement square width in
    the depth-(n-1) field for T1.  Feasible for n up to about 10.
    """
    if n_max < 1:
        raise ValueError("need at least one generation")
    if method == "analytic":
        T1 = tuple(_ladder_T1(n) for n in range(1, n_max + 1))
        Ts = tuple(_ladder_Ts(n) for n in range(1, n_max + 1))
        Tf = tuple(_ladder_Tf(n) for n in range(1, n_max + 1))
    elif method == "trajectory":
        T1l, Tsl, Tfl = [], [], []
        for n in range(1, n_max + 1):
            f_n = build_field(n)
            geom = cascade.component_geometry((0,) * (n - 1))
            xa, xb = float(geom.square.x_lo), float(geom.square.x_hi)
            for kind, acc in (("slow", Tsl), ("fast", Tfl)):
                y0 = float(witness_height((0,) * (n - 1), kind))
                segs = walk_strip(f_n, y0, 0.0, 1.0)
                acc.append(walk_time(segs, xa, xb))
            if n == 1:
                # ambient speed is 1; measure across the root square's width
                segs = walk_strip(f_n, 0.75, 0.0, 1.0)
                T1l.append(walk_time(segs, xa, xb))
            else:
                f_prev = build_field(n - 1)
                y0 = float(witness_height((0,) * (n - 2), "slow"))
                segs = walk_strip(f_prev, y0, 0.0, 1.0)
                T1l.append(walk_time(segs, xa, xb))
        T1, Ts, Tf = tuple(T1l), tuple(Tsl), tuple(Tfl)
    else:
        raise ValueError(f"unknown ladder method {method!r}")
    return CrossingLadder(
        n_max=n_max, method=method, T1=T1, Ts=Ts, Tf=Tf,
        T=_assemble_T(T1, Ts, Tf, n_max),
        sigma_partials=tuple(cascade.sigma(n + 1) for n in range(1, n_max + 1)))


# ---------------------------------------------------------------------------
# total-variation profile of the crossing-time function

def tv_level_bound(n: int) -> Fraction:
    """Lower bound 2^(n-1) (Tf_n - T1_n + Ts_{n-1} - Tf_{n-1}) on the total
    variation of the crossing-time function. Defined for n >= 3: the
    generation-1 crossing has no fast/slow split in the telescoped T."""
    if n < 3:
        raise ValueError("per-generation TV bounds start at generation 3")
    inc = (_ladder_Tf(n) - _ladder_T1(n)) + (_ladder_Ts(n - 1) - _ladder_Tf(n - 1))
    return 2 ** (n - 1) * inc


@dataclass(frozen=True)
class TvProfile:
    depth: int
    measured_tv: float
    level_bounds: Dict[int, float]
    sample_count: int
    sup_T: float
    fully_resolved: bool
    required_samples: int


def tv_profile(depth: int, samples: int) -> TvProfile:
    """Measured total variation of the strip crossing time, with bounds.

    The sample set always contains every fast and slow witness height of the
    built depth (the alternation that realizes the blow-up), plus a uniform
    fill of ``samples`` heights.  Resolving the generation-n alternation by
    uniform fill alone needs 2^(n+2) samples; fewer marks the profile as
    not fully resolved.
    """
    if depth < 3:
        raise ValueError("profiles need at least three generations")
    required = 2 ** (depth + 2)
    heights = set(all_witness_heights(depth, "fast"))
    heights.update(all_witness_heights(depth, "slow"))
    top = cascade.oscillation(1)
    for i in range(samples):
        heights.add(top * Fraction(2 * i + 1, 2 * samples))
    ordered = sorted(heights)
    values = [strip_time_exact(y, depth) for y in ordered]
    tv = float(sum(abs(values[i + 1] - values[i]) for i in range(len(values) - 1)))
    bounds = {n: float(tv_level_bound(n)) for n in range(3, depth + 1)}
    return TvProfile(depth=depth, measured_tv=tv, level_bounds=bounds,
                     sample_count=len(ordered),
                     sup_T=float(max(values)),
                     fully_resolved=samples >= required,
                     required_samples=required)
