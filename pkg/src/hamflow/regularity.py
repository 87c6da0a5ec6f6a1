"""Numerical verifiers for the quantitative flow-regularity estimates.

The estimates all share one mechanism: crossing times along level curves
change by at most the cumulative variation g(h) = |Db|({H <= h}) between
the levels, so flow maps inherit a modulus of continuity from g.  This
module computes g (exactly, from gradient-jump edges, for cascade-backed
fields; by finite differences otherwise), the coarea densities, and the
two estimate verifiers built on sampled point pairs.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import construction, flow, hamiltonian, rk, rootfind
from .errors import DomainError, NumericalError, TransversalityError
from .fields import PlanarField, ScalarField, low_discrepancy_points
from .geometry import AxisRect, Point

_SLACK = 1e-8           # inequality slack: lhs <= rhs + _SLACK * (rhs + 1)


# ---------------------------------------------------------------------------
# cumulative variation profiles

@dataclass(frozen=True)
class VariationProfile:
    """Cumulative |Db| mass below each level: g(h) = |Db|({H <= h})."""
    h: np.ndarray
    g: np.ndarray
    variant: str                # "bv" (measure mass) or "sobolev" (density)
    total_mass: float

    def value_at(self, h) -> np.ndarray:
        """g at arbitrary levels, affine between grid nodes, clamped outside."""
        return np.interp(np.asarray(h, dtype=float), self.h, self.g)

    def csv_rows(self) -> Iterator[Tuple[float, float]]:
        for hh, gg in zip(self.h, self.g):
            yield float(hh), float(gg)


def _clip_segment(p0, p1, window: AxisRect) -> Optional[Tuple[float, float]]:
    """Parameter range [t0, t1] of the segment p0 + t(p1 - p0) inside window."""
    t0, t1 = 0.0, 1.0
    for a, d, lo, hi in ((p0[0], p1[0] - p0[0], window.x_lo, window.x_hi),
                         (p0[1], p1[1] - p0[1], window.y_lo, window.y_hi)):
        if d == 0.0:
            if a < lo or a > hi:
                return None
            continue
        ta, tb = (lo - a) / d, (hi - a) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 >= t1:
            return None
    return t0, t1


def _cascade_edge_arrays(inner, window: AxisRect):
    """Clipped jump-edge masses and f-ranges inside the window."""
    fm, fM, mass = [], [], []
    for e in construction.jump_edges(inner):
        clip = _clip_segment(e.p0, e.p1, window)
        if clip is None:
            continue
        t0, t1 = clip
        if t1 <= t0:
            continue
        fa = e.f0 + t0 * (e.f1 - e.f0)
        fb = e.f0 + t1 * (e.f1 - e.f0)
        fm.append(min(fa, fb))
        fM.append(max(fa, fb))
        mass.append((t1 - t0) * e.mass)
    return np.array(fm), np.array(fM), np.array(mass)


def variation_profile(b: PlanarField, H: ScalarField, window: AxisRect,
                      h_grid: Sequence[float], variant: str = "bv",
                      resolution: int = 256) -> VariationProfile:
    """Cumulative variation g on a grid of levels.

    For a cascade-backed b with H its own streamfunction the BV variant
    sums exact per-edge gradient-jump masses, split along each edge by the
    affine level fraction; this avoids resolution bias exactly where TV
    blow-up is measured.  Otherwise (and always for the "sobolev" variant,
    which integrates the density |Db| dz) the window is tiled with
    resolution^2 cells, |Db| is the Frobenius norm of a central-difference
    Jacobian at the cell center, and straddling cells contribute the
    linearly interpolated area fraction.
    """
    hs = np.asarray(h_grid, dtype=float)
    if hs.ndim != 1 or len(hs) < 1:
        raise ValueError("h_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(hs) <= 0):
        raise ValueError("h_grid must be strictly increasing")
    if variant not in ("bv", "sobolev"):
        raise ValueError(f"unknown variant {variant!r}")

    inner = construction.cascade_inner(b)
    if variant == "bv" and inner is not None and H is b.stream:
        fm, fM, mass = _cascade_edge_arrays(inner, window)
        if len(mass) == 0:
            g = np.zeros_like(hs)
            return VariationProfile(hs, g, variant, 0.0)
        span = fM - fm
        flat = span <= 0.0
        g = np.empty_like(hs)
        for i, h in enumerate(hs):
            # {H <= h} = {f >= -h}; f is affine along each edge
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.clip((fM + h) / np.where(flat, 1.0, span), 0.0, 1.0)
            frac = np.where(flat, (fm >= -h).astype(float), frac)
            g[i] = float(np.dot(mass, frac))
        return VariationProfile(hs, g, variant, float(mass.sum()))

    n = int(resolution)
    if n < 2:
        raise ValueError("resolution must be at least 2")
    xe = np.linspace(window.x_lo, window.x_hi, n + 1)
    ye = np.linspace(window.y_lo, window.y_hi, n + 1)
    sx, sy = float(xe[1] - xe[0]), float(ye[1] - ye[0])
    xc = 0.5 * (xe[:-1] + xe[1:])
    yc = 0.5 * (ye[:-1] + ye[1:])
    gx, gy = np.meshgrid(xc, yc)
    dx, dy = 0.5 * sx, 0.5 * sy
    b1r, b2r = b.velocity_many(gx + dx, gy)
    b1l, b2l = b.velocity_many(gx - dx, gy)
    b1u, b2u = b.velocity_many(gx, gy + dy)
    b1d, b2d = b.velocity_many(gx, gy - dy)
    j11 = (b1r - b1l) / (2 * dx)
    j21 = (b2r - b2l) / (2 * dx)
    j12 = (b1u - b1d) / (2 * dy)
    j22 = (b2u - b2d) / (2 * dy)
    density = np.sqrt(j11 ** 2 + j12 ** 2 + j21 ** 2 + j22 ** 2)
    mass = (density * sx * sy).ravel()

    hx, hyy = np.meshgrid(xe, ye)
    hv = np.asarray(H.value_many(hx, hyy), dtype=float)
    corners = np.stack((hv[:-1, :-1], hv[:-1, 1:], hv[1:, :-1], hv[1:, 1:]))
    hmin = corners.min(axis=0).ravel()
    hmax = corners.max(axis=0).ravel()
    span = hmax - hmin
    flat = span <= 0.0
    g = np.empty_like(hs)
    for i, h in enumerate(hs):
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.clip((h - hmin) / np.where(flat, 1.0, span), 0.0, 1.0)
        frac = np.where(flat, (hmin <= h).astype(float), frac)
        g[i] = float(np.dot(mass, frac))
    return VariationProfile(hs, g, variant, float(mass.sum()))


# ---------------------------------------------------------------------------
# coarea densities

def coarea_density(H: ScalarField, window: AxisRect,
                   h_grid: Sequence[float],
                   e: Optional[Tuple[float, float]] = None,
                   x_resolution: Optional[float] = None) -> np.ndarray:
    """Pushforward density of area measure under H.

    rho(h) = integral over {H = h} of 1 / |grad H| with respect to
    arclength, evaluated on the extracted level polyline with midpoint
    gradients.  The identity integral(rho) = window area holds within the
    discretization error and is asserted by the test suite at 1%.
    """
    hs = np.asarray(h_grid, dtype=float)
    if e is None:
        samples = low_discrepancy_points(window, 512)
        gx, gy = H.gradient_many(samples[:, 0], samples[:, 1])
        mx, my = float(np.mean(-np.asarray(gy))), float(np.mean(np.asarray(gx)))
        nrm = math.hypot(mx, my)
        if nrm < 1e-12:
            raise TransversalityError("no dominant direction for the "
                                      "level-curve charts")
        e = (mx / nrm, my / nrm)
    out = np.empty_like(hs)
    for i, h in enumerate(hs):
        curve = hamiltonian.level_curve(H, float(h), window, e=e,
                                        x_resolution=x_resolution)
        p = curve.points
        seg = p[1:] - p[:-1]
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        mid = 0.5 * (p[1:] + p[:-1])
        ggx, ggy = H.gradient_many(mid[:, 0], mid[:, 1])
        grad = np.hypot(np.asarray(ggx), np.asarray(ggy))
        if np.any(grad <= 0.0):
            raise TransversalityError(f"vanishing gradient on level {h}")
        out[i] = float(np.sum(lengths / grad))
    return out


# ---------------------------------------------------------------------------
# estimate constants and reports

def lipschitz_constant_Cprime(C: float, sup_norm: float, delta: float) -> float:
    """Closed-form constant of the local Lipschitz estimate.

    C is the compressibility constant (1 for divergence-free fields),
    sup_norm bounds |b|, delta the transversality margin.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if C < 1.0:
        raise ValueError("compressibility constant is >= 1")
    m = float(sup_norm)
    d = float(delta)
    return (C * C * m / d ** 2) * (1.0 + 2.0 * m / d + m / d ** 2)


@dataclass(frozen=True)
class EstimateReport:
    kind: str
    pairs_tested: int
    violations: int
    skipped: int
    worst_ratio: float
    constants: Dict[str, float]
    worst_pair: Optional[Tuple[Tuple[float, float], Tuple[float, float]]]

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "pairs_tested": self.pairs_tested,
            "violations": self.violations,
            "skipped": self.skipped,
            "worst_ratio": self.worst_ratio,
            "constants": dict(self.constants),
            "worst_pair": None if self.worst_pair is None else
                [list(self.worst_pair[0]), list(self.worst_pair[1])],
        }


def _sampled_bounds(b: PlanarField, window: AxisRect, e, samples: int = 2048):
    pts = low_discrepancy_points(window, samples)
    vx, vy = b.velocity_many(pts[:, 0], pts[:, 1])
    vx, vy = np.asarray(vx), np.asarray(vy)
    along = vx * e[0] + vy * e[1]
    speed = np.hypot(vx, vy)
    return float(along.min()), float(speed.max())


def _direction(b: PlanarField, window: AxisRect) -> Tuple[float, float]:
    if b.transversality is not None:
        ex, ey = b.transversality.e
        nrm = math.hypot(ex, ey)
        return ex / nrm, ey / nrm
    pts = low_discrepancy_points(window, 512)
    vx, vy = b.velocity_many(pts[:, 0], pts[:, 1])
    mx, my = float(np.mean(np.asarray(vx))), float(np.mean(np.asarray(vy)))
    nrm = math.hypot(mx, my)
    if nrm < 1e-12:
        raise TransversalityError("no dominant direction on the window")
    return mx / nrm, my / nrm


def _flow_to(b: PlanarField, inner, z: Point, t: float) -> Optional[Point]:
    """Time-t image by the exact walker (cascade) or the RK oracle."""
    if inner is not None:
        x1, y1, fl = construction.flow_point(inner, z.x, z.y, t)
        return Point(x1, y1) if fl == construction.FLOW_OK else None
    out = flow.rk_flow_ex(b, z, t, tol=1e-10)
    return out.point if out.flag == flow.FLOW_OK else None


def verify_local_estimate(b: PlanarField, H: ScalarField, window: AxisRect,
                          t_bar: float, pairs: int, seed: int = 0,
                          h_levels: int = 512,
                          resolution: int = 256) -> EstimateReport:
    """Sampled check of the local Lipschitz estimate.

    For pairs z, z' in the window with distance to the window boundary
    larger than sup|b| * t_bar, verifies

        |X(t_bar, z) - X(t_bar, z')| <= C' (|z - z'| + |g(H(z)) - g(H(z'))|)

    with C' from lipschitz_constant_Cprime and g the cumulative variation
    on the window.  Pairs violating the boundary-margin precondition, or
    whose flow cannot be completed, are skipped and counted.
    """
    if t_bar < 0.0:
        raise ValueError("t_bar must be nonnegative")
    e = _direction(b, window)
    delta, sup_seen = _sampled_bounds(b, window, e)
    if delta <= 0.0:
        raise TransversalityError(f"b . e = {delta} <= 0 sampled on the "
                                  f"window; the estimate needs b . e > 0")
    sup = b.sup_norm if math.isfinite(b.sup_norm) else sup_seen
    C = b.compressibility
    c_prime = lipschitz_constant_Cprime(C, sup, delta)

    corners = np.array([(window.x_lo, window.y_lo), (window.x_lo, window.y_hi),
                        (window.x_hi, window.y_lo), (window.x_hi, window.y_hi)])
    probe = np.vstack((low_discrepancy_points(window, 1024), corners))
    hvals = np.asarray(H.value_many(probe[:, 0], probe[:, 1]), dtype=float)
    h_lo, h_hi = float(hvals.min()), float(hvals.max())
    pad = 1e-9 * (h_hi - h_lo + 1.0)
    grid = np.linspace(h_lo - pad, h_hi + pad, int(h_levels))
    profile = variation_profile(b, H, window, grid, variant="bv",
                                resolution=resolution)

    inner = construction.cascade_inner(b)
    margin = sup * t_bar
    rng = np.random.default_rng(seed)
    zs = rng.uniform((window.x_lo, window.y_lo), (window.x_hi, window.y_hi),
                     size=(pairs, 2, 2))
    tested = violations = skipped = 0
    worst_ratio = 0.0
    worst_pair = None
    for z, zp in zs:
        if (window.distance_to_boundary(z[0], z[1]) <= margin
                or window.distance_to_boundary(zp[0], zp[1]) <= margin):
            skipped += 1
            continue
        x1 = _flow_to(b, inner, Point(*z), t_bar)
        x2 = _flow_to(b, inner, Point(*zp), t_bar)
        if x1 is None or x2 is None:
            skipped += 1
            continue
        gz, gzp = profile.value_at([H.value(*z), H.value(*zp)])
        lhs = math.hypot(x1.x - x2.x, x1.y - x2.y)
        rhs = c_prime * (math.hypot(z[0] - zp[0], z[1] - zp[1])
                         + abs(float(gz) - float(gzp)))
        tested += 1
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else math.inf)
        if ratio > worst_ratio:
            worst_ratio = ratio
            worst_pair = ((float(z[0]), float(z[1])),
                          (float(zp[0]), float(zp[1])))
        if lhs > rhs + _SLACK * (rhs + 1.0):
            violations += 1
    return EstimateReport(
        kind="local", pairs_tested=tested, violations=violations,
        skipped=skipped, worst_ratio=worst_ratio,
        constants={"C_prime": c_prime, "C": C, "sup_norm": sup,
                   "delta": delta, "t_bar": t_bar,
                   "e_x": e[0], "e_y": e[1]},
        worst_pair=worst_pair)


# ---------------------------------------------------------------------------
# global estimate: covering search and the two-constant check

_N_DIRECTIONS = 16
_L_FLAT = 1.0           # graph Lipschitz cap; cos(arctan 1) = 1/sqrt(2)


def _covering_radius(b: PlanarField, k: int, samples_per_ball: int = 48,
                     r_floor: float = 1e-4) -> Tuple[float, int, int]:
    """Search for a covering radius r_bar realizing the flatness condition.

    Balls of radius r_bar tile the domain; a ball matters when any sampled
    |b| exceeds 1/k.  Every such ball must admit one of 16 unit directions
    with b . e >= |b| / sqrt(2) at every sample of the 4 r_bar ball.  The
    radius halves until all balls pass; the first stubborn ball is named in
    the error when the floor is reached.
    """
    dom = b.domain
    angles = 2.0 * math.pi * np.arange(_N_DIRECTIONS) / _N_DIRECTIONS
    dirs = np.stack((np.cos(angles), np.sin(angles)), axis=1)
    unit = low_discrepancy_points(AxisRect(-1.0, 1.0, -1.0, 1.0),
                                  samples_per_ball)
    unit = unit[np.hypot(unit[:, 0], unit[:, 1]) <= 1.0]
    if len(unit) < 8:
        raise NumericalError("too few ball sample points")
    r_bar = 0.125 * min(dom.width, dom.height)
    threshold = 1.0 / k
    worst_ball = None
    while r_bar >= r_floor:
        nxc = max(2, int(math.ceil(dom.width / r_bar)) + 1)
        nyc = max(2, int(math.ceil(dom.height / r_bar)) + 1)
        cx = np.linspace(dom.x_lo, dom.x_hi, nxc)
        cy = np.linspace(dom.y_lo, dom.y_hi, nyc)
        ok = True
        kept = 0
        for yy in cy:
            px = cx[:, None] + 4.0 * r_bar * unit[None, :, 0]
            py = np.broadcast_to(yy + 4.0 * r_bar * unit[None, :, 1],
                                 px.shape)
            px = np.clip(px.ravel(), dom.x_lo, dom.x_hi)
            py = np.clip(py.ravel(), dom.y_lo, dom.y_hi)
            vx, vy = b.velocity_many(px, py)
            vx = np.asarray(vx).reshape(len(cx), -1)
            vy = np.asarray(vy).reshape(len(cx), -1)
            speed = np.hypot(vx, vy)
            alive = (speed > threshold).any(axis=1)
            kept += int(alive.sum())
            if not alive.any():
                continue
            # b . e_i >= |b| cos(arctan L) for all samples, some direction
            proj = (vx[..., None] * dirs[:, 0] + vy[..., None] * dirs[:, 1])
            flat = (proj >= speed[..., None] / math.sqrt(2.0) - 1e-12)
            good = flat.all(axis=1).any(axis=1)
            bad = alive & ~good
            if bad.any():
                i = int(np.argmax(bad))
                worst_ball = (float(cx[i]), float(yy), r_bar)
                ok = False
                break
        if ok and kept > 0:
            return r_bar, kept, 0
        if ok:
            raise TransversalityError(
                f"no ball met |b| > 1/k = {threshold}; Omega_k looks empty")
        r_bar *= 0.5
    raise TransversalityError(
        f"covering search failed: ball at {worst_ball[:2]} admits no flat "
        f"direction at radius {worst_ball[2]}")


class _DenseTrajectory:
    """Adaptive RK trajectory with cubic Hermite dense output."""

    def __init__(self, b: PlanarField, z: Point, t_end: float, tol: float):
        ts: List[float] = []
        ys: List[np.ndarray] = []
        ds: List[np.ndarray] = []
        dom = b.domain
        exited = [False]

        def obs(tt, y, dy):
            if exited[0]:
                return
            ts.append(float(tt))
            ys.append(np.array(y, dtype=float))
            ds.append(np.array(dy, dtype=float))
            if not dom.contains(float(y[0]), float(y[1])):
                exited[0] = True

        rhs = flow._projected_rhs(b)
        max_step = getattr(b, "suggested_max_step", None)
        rk.integrate(rhs, 0.0, np.array((z.x, z.y)), float(t_end),
                     tol=tol, max_step=max_step, observer=obs)
        self.t = np.array(ts)
        self.y = np.stack(ys)
        self.d = np.stack(ds)
        self.t_max = float(self.t[-1])

    def at(self, s) -> np.ndarray:
        """Position(s) at time(s) s, cubic Hermite between accepted steps."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx = np.clip(np.searchsorted(self.t, s, side="right") - 1,
                      0, len(self.t) - 2)
        t0, t1 = self.t[idx], self.t[idx + 1]
        h = np.where(t1 > t0, t1 - t0, 1.0)
        u = np.clip((s - t0) / h, 0.0, 1.0)[:, None]
        y0, y1 = self.y[idx], self.y[idx + 1]
        d0, d1 = self.d[idx] * h[:, None], self.d[idx + 1] * h[:, None]
        u2, u3 = u * u, u * u * u
        return ((2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * d0
                + (-2 * u3 + 3 * u2) * y1 + (u3 - u2) * d1)


def verify_global_estimate(b: PlanarField, H: ScalarField, k: int, t: float,
                           pairs: int, seed: int = 0, h_levels: int = 512,
                           resolution: int = 256,
                           scan: int = 256) -> EstimateReport:
    """Sampled check of the global two-constant estimate.

    For sampled centers z_bar in Omega_k and companions z in B_r(z_bar),
    the time s minimizing |X(t, z_bar) - X(s, z)| is located inside the
    bracket |t - s| <= c2 (|g(H(z_bar)) - g(H(z))| + |z_bar - z|), which
    realizes item 2 by construction; item 1 and the combined chain
    inequality are then checked at that s.  Constants follow the covering:
    c1 = 2(k+1), c2 = N_tilde (k+1)^2 (1 + 2 sup|b|) + 2(k+1).
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if t <= 0.0:
        raise ValueError("the horizon t must be positive")
    dom = b.domain
    if math.isfinite(b.sup_norm):
        sup = b.sup_norm
    else:
        pts = low_discrepancy_points(dom, 4096)
        vx, vy = b.velocity_many(pts[:, 0], pts[:, 1])
        sup = float(np.hypot(np.asarray(vx), np.asarray(vy)).max())

    r_bar, balls_kept, _ = _covering_radius(b, k)
    n_tilde = int(math.ceil(t * sup / r_bar))
    c1 = 2.0 * (k + 1)
    c2 = n_tilde * (k + 1) ** 2 * (1.0 + 2.0 * sup) + 2.0 * (k + 1)
    r = min(r_bar, r_bar / (2.0 * (k + 1) * sup),
            t / (2.0 * n_tilde * (k + 1)))

    window = dom
    probe = low_discrepancy_points(window, 1024)
    hvals = np.asarray(H.value_many(probe[:, 0], probe[:, 1]), dtype=float)
    pad = 1e-9 * (float(hvals.max() - hvals.min()) + 1.0)
    grid = np.linspace(float(hvals.min()) - pad, float(hvals.max()) + pad,
                       int(h_levels))
    profile = variation_profile(b, H, window, grid, variant="bv",
                                resolution=resolution)

    rng = np.random.default_rng(seed)
    tested = violations = skipped = 0
    worst_ratio = 0.0
    worst_pair = None
    threshold = 1.0 / k
    attempts = 0
    while tested + skipped < pairs and attempts < 20 * pairs:
        attempts += 1
        zb = Point(float(rng.uniform(dom.x_lo, dom.x_hi)),
                   float(rng.uniform(dom.y_lo, dom.y_hi)))
        vx, vy = b.velocity(zb.x, zb.y)
        if math.hypot(vx, vy) <= threshold:
            continue        # plainly outside Omega_k; not a test pair
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        rad = r * math.sqrt(float(rng.uniform(0.0, 1.0)))
        z = Point(zb.x + rad * math.cos(phi), zb.y + rad * math.sin(phi))
        if not dom.contains(z.x, z.y):
            skipped += 1
            continue

        # membership z_bar in Omega_k: min |b| along the level set through
        # z_bar, sampled on its trajectory, must exceed 1/k
        traj_zb = _DenseTrajectory(b, zb, t, tol=1e-9)
        if traj_zb.t_max < t:
            skipped += 1
            continue
        samp = traj_zb.at(np.linspace(0.0, t, 128))
        svx, svy = b.velocity_many(samp[:, 0], samp[:, 1])
        if float(np.hypot(np.asarray(svx), np.asarray(svy)).min()) <= threshold:
            skipped += 1
            continue

        xt_zb = traj_zb.at(t)[0]
        gb, gz = profile.value_at([H.value(zb.x, zb.y), H.value(z.x, z.y)])
        dg = abs(float(gb) - float(gz))
        dz = math.hypot(zb.x - z.x, zb.y - z.y)
        dh = abs(H.value(zb.x, zb.y) - H.value(z.x, z.y))
        w = c2 * (dg + dz)
        s_lo, s_hi = max(0.0, t - w), t + w
        traj_z = _DenseTrajectory(b, z, s_hi, tol=1e-9)
        if traj_z.t_max < t:
            skipped += 1      # companion exits before the horizon
            continue
        s_hi = min(s_hi, traj_z.t_max)
        if s_hi <= s_lo:
            skipped += 1
            continue

        def miss(s, _tr=traj_z, _x=xt_zb):
            p = _tr.at(s)[0]
            return math.hypot(p[0] - _x[0], p[1] - _x[1])

        ss = np.linspace(s_lo, s_hi, scan)
        ps = traj_z.at(ss)
        d2 = np.hypot(ps[:, 0] - xt_zb[0], ps[:, 1] - xt_zb[1])
        j = int(np.argmin(d2))
        lo = ss[max(0, j - 1)]
        hi = ss[min(len(ss) - 1, j + 1)]
        s_star = rootfind.golden_minimize(miss, float(lo), float(hi))
        lhs1 = miss(s_star)
        rhs1 = c1 * dh
        lhs_c = miss(t)     # t is inside [s_lo, s_hi] once both survive
        rhs_c = sup * (c1 + c2) * dz + c2 * sup * dg
        tested += 1
        bad = False
        for lhs, rhs in ((lhs1, rhs1), (lhs_c, rhs_c)):
            ratio = lhs / rhs if rhs > 0 else (0.0 if lhs <= _SLACK else math.inf)
            if ratio > worst_ratio:
                worst_ratio = ratio
                worst_pair = ((zb.x, zb.y), (z.x, z.y))
            if lhs > rhs + _SLACK * (rhs + 1.0):
                bad = True
        if bad:
            violations += 1
    return EstimateReport(
        kind="global", pairs_tested=tested, violations=violations,
        skipped=skipped, worst_ratio=worst_ratio,
        constants={"c1": c1, "c2": c2, "r_bar": r_bar, "N_tilde": n_tilde,
                   "r": r, "k": float(k), "sup_norm": sup,
                   "balls": float(balls_kept), "L": _L_FLAT,
                   "directions": float(_N_DIRECTIONS)},
        worst_pair=worst_pair)


# ---------------------------------------------------------------------------
# discrete norms of flow maps

@dataclass(frozen=True)
class DiscreteNorm:
    value: float
    excluded: int

    def __float__(self) -> float:
        return self.value


def _region_slices(fm: flow.FlowMap, region: Optional[AxisRect]):
    if region is None:
        return slice(0, fm.nx), slice(0, fm.ny)
    sx, sy = fm.spacing
    eps = 1e-9 * max(sx, sy)
    ix0 = int(math.ceil((region.x_lo - fm.origin.x - eps) / sx))
    ix1 = int(math.floor((region.x_hi - fm.origin.x + eps) / sx))
    iy0 = int(math.ceil((region.y_lo - fm.origin.y - eps) / sy))
    iy1 = int(math.floor((region.y_hi - fm.origin.y + eps) / sy))
    ix0, iy0 = max(ix0, 0), max(iy0, 0)
    ix1, iy1 = min(ix1, fm.nx - 1), min(iy1, fm.ny - 1)
    if ix1 - ix0 < 1 or iy1 - iy0 < 1:
        raise ValueError("region selects fewer than 2 nodes per axis")
    return slice(ix0, ix1 + 1), slice(iy0, iy1 + 1)


def _trapezoid_weights(n: int, spacing: float) -> np.ndarray:
    w = np.full(n, spacing)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def discrete_tv(fm: flow.FlowMap, component: int = 0,
                region: Optional[AxisRect] = None) -> DiscreteNorm:
    """Anisotropic discrete total variation of one flow-map component.

    TV = sum over x-neighbor pairs of |du| times the transverse trapezoid
    weight, plus the same with axes swapped; so u(x, y) = x over a region
    gives exactly the region area (and the identity map has TV = area per
    component, one axis each).  Differences touching a flagged node are
    excluded and counted.
    """
    sxs, sys_ = _region_slices(fm, region)
    u = fm.images[sys_, sxs, component]
    ok = fm.flags[sys_, sxs] == 0
    sx, sy = fm.spacing
    ny, nx = u.shape

    dux = np.abs(u[:, 1:] - u[:, :-1])
    okx = ok[:, 1:] & ok[:, :-1]
    wy = _trapezoid_weights(ny, sy)
    tv_x = float(np.sum(dux * okx * wy[:, None]))

    duy = np.abs(u[1:, :] - u[:-1, :])
    oky = ok[1:, :] & ok[:-1, :]
    wx = _trapezoid_weights(nx, sx)
    tv_y = float(np.sum(duy * oky * wx[None, :]))

    excluded = int((~okx).sum() + (~oky).sum())
    return DiscreteNorm(tv_x + tv_y, excluded)


def discrete_sobolev(fm: flow.FlowMap, p: float,
                     region: Optional[AxisRect] = None) -> DiscreteNorm:
    """Discrete W^(1,p) seminorm of the flow map on a region.

    Cell-centered finite-difference Jacobian of the (two-component) map;
    the norm is (sum |DX|_F^p * cell area)^(1/p).  Cells with any flagged
    corner are excluded and counted.
    """
    if p < 1.0:
        raise ValueError("p must be at least 1")
    sxs, sys_ = _region_slices(fm, region)
    img = fm.images[sys_, sxs]
    ok = fm.flags[sys_, sxs] == 0
    sx, sy = fm.spacing
    cell_ok = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, :-1] & ok[1:, 1:]

    dx = 0.5 * ((img[:-1, 1:] - img[:-1, :-1])
                + (img[1:, 1:] - img[1:, :-1])) / sx
    dy = 0.5 * ((img[1:, :-1] - img[:-1, :-1])
                + (img[1:, 1:] - img[:-1, 1:])) / sy
    frob = np.sqrt(dx[..., 0] ** 2 + dx[..., 1] ** 2
                   + dy[..., 0] ** 2 + dy[..., 1] ** 2)
    total = float(np.sum((frob ** p) * cell_ok) * sx * sy)
    excluded = int((~cell_ok).sum())
    return DiscreteNorm(total ** (1.0 / p), excluded)
