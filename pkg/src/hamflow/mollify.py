"""Smoothing of the cascade profile, one generation increment at a time.

The profile f_n is a sum of piecewise-affine increments h_l = f_l - f_{l-1},
each supported on the generation-l components and affine outside a finite
set of straight gradient-jump edges.  Convolving each increment with its own
compactly supported bump (radius tied to the generation's safety margin)
keeps the smoothed sum equal to the exact profile away from the edges, in
particular on every deeper component, while making the field classically
differentiable.

The distributional Hessian of an increment is a measure on its jump edges,
so second-derivative quantities of the smoothed increment reduce to line
integrals (pointwise values) or double line integrals against the kernel's
autocorrelation (squared L2 norms).  Both routes avoid area grids entirely;
a grid fallback exists for p != 2.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from . import cascade, construction, quadrature
from .errors import NumericalError, ResolutionError
from .fields import PlanarField, ScalarField, Transversality
from .geometry import AxisRect

# panel nodes reparametrized to [0, 1]
_T01 = 0.5 * (np.asarray(quadrature._NODES) + 1.0)
_W01 = 0.5 * np.asarray(quadrature._WEIGHTS)
# higher-order panel for the collar tensor quadrature: the bump's
# derivatives blow up toward the support rim, so five points per panel
# leave ~1e-6 relative error where ten reach rounding level
_N10, _W10 = np.polynomial.legendre.leggauss(10)
_T01_10 = 0.5 * (_N10 + 1.0)
_W01_10 = 0.5 * _W10


# ---------------------------------------------------------------------------
# the kernel

class MollifierKernel:
    """Radial bump exp(-1/(1 - |2u|^2)) on |u| < 1/2, normalized to mass 1.

    Unit scale throughout this class; users of a radius-r mollifier evaluate
    at u = w/r and rescale by 1/r^2 themselves.  The first moment vanishes
    by symmetry, which is what makes mollification exact on affine pieces.
    """

    name = "bump"

    def __init__(self):
        self._norm: Optional[float] = None
        self._acf: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._validated = False

    @property
    def normalization(self) -> float:
        if self._norm is None:
            # fixed-order polar GL: the profile is flat to all orders at the
            # rim, so an adaptive relative-error rule would subdivide the
            # tail forever while a single high-order panel nails it
            nodes, weights = np.polynomial.legendre.leggauss(64)
            s = 0.25 * (nodes + 1.0)
            w = 0.25 * weights
            mass = 2.0 * math.pi * float(np.dot(w, self._raw(s * s) * s))
            self._norm = 1.0 / mass
        return self._norm

    @staticmethod
    def _raw(rsq):
        """Unnormalized profile as a function of |u|^2, zero beyond 1/4."""
        rsq = np.asarray(rsq, dtype=float)
        q = 4.0 * rsq
        out = np.zeros(q.shape)
        inside = q < 1.0 - 1e-14
        with np.errstate(over="ignore"):
            out[inside] = np.exp(-1.0 / (1.0 - q[inside]))
        return out

    def value_many(self, ux, uy) -> np.ndarray:
        ux = np.asarray(ux, dtype=float)
        uy = np.asarray(uy, dtype=float)
        return self.normalization * self._raw(ux * ux + uy * uy)

    def grad_many(self, ux, uy) -> Tuple[np.ndarray, np.ndarray]:
        ux = np.asarray(ux, dtype=float)
        uy = np.asarray(uy, dtype=float)
        q = 4.0 * (ux * ux + uy * uy)
        scale = np.zeros(q.shape)
        inside = q < 1.0 - 1e-14
        denom = (1.0 - q[inside]) ** 2
        with np.errstate(over="ignore"):
            scale[inside] = np.exp(-1.0 / (1.0 - q[inside])) * (-8.0 / denom)
        scale *= self.normalization
        return scale * ux, scale * uy

    def autocorrelation(self) -> Tuple[np.ndarray, np.ndarray]:
        """Radial autocorrelation table: (shifts in [0, 1], correlation).

        phi(d) = integral rho(u) rho(u - d e1) du; supported on [0, 1] and
        smooth, so linear interpolation on a fine grid is plenty.  The
        radius-r kernel's autocorrelation is phi(d/r) / r^2.
        """
        if self._acf is None:
            n1d = 48
            nodes, weights = np.polynomial.legendre.leggauss(n1d)
            x = 0.5 * nodes         # panel [-1/2, 1/2] per axis
            w = 0.5 * weights
            gx, gy = np.meshgrid(x, x)
            ww = np.outer(w, w).ravel()
            base = self.value_many(gx, gy).ravel()
            d = np.linspace(0.0, 1.0, 1025)
            shifted = self.value_many(gx.ravel()[None, :] - d[:, None],
                                      np.broadcast_to(gy.ravel(),
                                                      (len(d), gx.size)))
            phi = shifted @ (base * ww)
            phi[-1] = 0.0
            self._acf = (d, phi)
        return self._acf


@lru_cache(maxsize=1)
def standard_kernel() -> MollifierKernel:
    return MollifierKernel()


def check_kernel(kernel) -> None:
    """Moment guard: unit mass, vanishing first moment, support in B_{1/2}.

    Any failure is a construction bug (or an unsuitable custom kernel), so
    it raises instead of warning.
    """
    if getattr(kernel, "_validated", False):
        return
    n1d = 48
    nodes, weights = np.polynomial.legendre.leggauss(n1d)
    x = 0.5 * nodes
    w = 0.5 * weights
    gx, gy = np.meshgrid(x, x)
    ww = np.outer(w, w)
    vals = kernel.value_many(gx, gy)
    mass = float(np.sum(vals * ww))
    m1 = math.hypot(float(np.sum(gx * vals * ww)),
                    float(np.sum(gy * vals * ww)))
    rim = kernel.value_many(np.array([0.5, 0.7, -0.5]),
                            np.array([0.0, 0.0, 0.01]))
    # the tensor grid itself is only good to ~1e-8 on the curved rim, so
    # the gate tests for wrong kernels, not for quadrature noise
    if abs(mass - 1.0) > 1e-6:
        raise NumericalError(f"kernel mass {mass} is not 1")
    if m1 > 1e-12:
        raise NumericalError(f"kernel first moment {m1} is not 0")
    if np.any(rim != 0.0):
        raise NumericalError("kernel support leaks outside the half ball")
    if float(vals.min()) < 0.0:
        raise NumericalError("kernel takes negative values")
    kernel._validated = True


# ---------------------------------------------------------------------------
# generation increments

class Increment(ScalarField):
    """One generation's piecewise-affine increment h_l = f_l - f_{l-1}.

    Supported on the generation's component middle bands; affine off the
    generation's own jump edges (the shallower structure cancels in the
    difference, the deeper one does not exist yet).
    """

    def __init__(self, level: int):
        if level < 1:
            raise ValueError(f"generation index must be >= 1, got {level}")
        self.level = level
        self.f_hi = construction.build_field(level)
        self.f_lo = construction.build_field(level - 1) if level > 1 else None
        self.domain = self.f_hi.domain
        self.lipschitz_bound = 2.0 * self.f_hi.lipschitz_bound
        edges = construction.generation_jump_edges(level)
        self.edges = edges
        self.p0 = np.array([e.p0 for e in edges])
        self.p1 = np.array([e.p1 for e in edges])
        self.delta = np.array([e.delta for e in edges])
        self.nu = np.array([e.nu for e in edges])
        # per-axis cut lines for quadrature splitting
        vert = self.p0[:, 0] == self.p1[:, 0]
        horiz = self.p0[:, 1] == self.p1[:, 1]
        self.x_cuts = np.unique(self.p0[vert, 0])
        self.y_cuts = np.unique(self.p0[horiz, 1])
        # support boxes: middle band of every component of this generation
        bands = []
        c = cascade.component_side(level)
        for path in _level_paths(level):
            x0, y0 = cascade.component_origin(path)
            bands.append((float(x0 + c / 4), float(x0 + 3 * c / 4),
                          float(y0), float(y0 + c)))
        self.bands = np.array(bands)

    def value(self, x: float, y: float) -> float:
        lo = y if self.f_lo is None else self.f_lo.value(x, y)
        return self.f_hi.value(x, y) - lo

    def gradient(self, x: float, y: float) -> tuple:
        gx, gy = self.f_hi.gradient(x, y)
        if self.f_lo is None:
            return gx, gy - 1.0
        lx, ly = self.f_lo.gradient(x, y)
        return gx - lx, gy - ly

    def value_many(self, xs, ys):
        hi = self.f_hi.value_many(xs, ys)
        lo = (np.asarray(ys, dtype=float) if self.f_lo is None
              else self.f_lo.value_many(xs, ys))
        return hi - lo

    def edge_distance(self, x: float, y: float) -> float:
        """Distance from a point to the nearest jump edge."""
        d = self.p1 - self.p0
        w = np.array((x, y)) - self.p0
        t = np.clip(np.einsum("ij,ij->i", w, d)
                    / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
        closest = self.p0 + t[:, None] * d
        return float(np.hypot(closest[:, 0] - x, closest[:, 1] - y).min())

    def band_distance(self, x: float, y: float) -> float:
        """Distance to the union of support bands (0 inside)."""
        bx = np.clip(x, self.bands[:, 0], self.bands[:, 1])
        by = np.clip(y, self.bands[:, 2], self.bands[:, 3])
        return float(np.hypot(bx - x, by - y).min())


def _level_paths(level: int) -> Iterator[Tuple[int, ...]]:
    if level == 1:
        yield ()
        return
    for k in range(2 ** (level - 1)):
        yield tuple((k >> (level - 2 - i)) & 1 for i in range(level - 1))


@lru_cache(maxsize=None)
def increment(level: int) -> Increment:
    return Increment(level)


# ---------------------------------------------------------------------------
# mollified increments

class MollifiedIncrement(ScalarField):
    """Convolution of one increment with its generation's bump.

    Points farther than half the mollification radius from every jump edge
    evaluate exactly (zero first moment on affine pieces); the remaining
    collar evaluates by Gauss quadrature over the kernel support, split
    along the increment's straight cut lines.
    """

    def __init__(self, h: Increment, r: float, kernel: MollifierKernel):
        if r <= 0.0:
            raise ValueError("mollification radius must be positive")
        check_kernel(kernel)
        self.h = h
        self.r = float(r)
        self.kernel = kernel
        self.level = h.level
        self.domain = h.domain
        self.lipschitz_bound = h.lipschitz_bound

    # -- quadrature plumbing --------------------------------------------

    def _axis_nodes(self, lo: float, hi: float, cuts: np.ndarray):
        """GL nodes/weights on [lo, hi], split at cuts, panels <= r/8."""
        inner = cuts[(cuts > lo) & (cuts < hi)]
        breaks = np.concatenate(([lo], inner, [hi]))
        nodes, weights = [], []
        for a, b in zip(breaks[:-1], breaks[1:]):
            m = max(1, int(math.ceil((b - a) / (self.r / 8.0))))
            edges = np.linspace(a, b, m + 1)
            for aa, bb in zip(edges[:-1], edges[1:]):
                half = 0.5 * (bb - aa)
                nodes.append(0.5 * (aa + bb) + half * _N10)
                weights.append(half * _W10)
        return np.concatenate(nodes), np.concatenate(weights)

    def _window(self, x: float, y: float):
        half = 0.5 * self.r
        xs, wx = self._axis_nodes(x - half, x + half, self.h.x_cuts)
        ys, wy = self._axis_nodes(y - half, y + half, self.h.y_cuts)
        gx, gy = np.meshgrid(xs, ys)
        hw = self.h.value_many(gx, gy)
        ux = (x - gx) / self.r
        uy = (y - gy) / self.r
        return hw, ux, uy, np.outer(wy, wx)

    def _quad_value(self, x: float, y: float) -> float:
        hw, ux, uy, ww = self._window(x, y)
        rho = self.kernel.value_many(ux, uy) / self.r ** 2
        return float(np.sum(hw * rho * ww))

    def _quad_gradient(self, x: float, y: float) -> tuple:
        hw, ux, uy, ww = self._window(x, y)
        gx, gy = self.kernel.grad_many(ux, uy)
        scale = self.r ** 3
        return (float(np.sum(hw * gx * ww)) / scale,
                float(np.sum(hw * gy * ww)) / scale)

    # -- public evaluation ------------------------------------------------

    def value(self, x: float, y: float) -> float:
        half = 0.5 * self.r
        if self.h.band_distance(x, y) >= half:
            return 0.0
        if self.h.edge_distance(x, y) > half:
            return self.h.value(x, y)
        return self._quad_value(x, y)

    def gradient(self, x: float, y: float) -> tuple:
        half = 0.5 * self.r
        if self.h.band_distance(x, y) >= half:
            return 0.0, 0.0
        if self.h.edge_distance(x, y) > half:
            return self.h.gradient(x, y)
        return self._quad_gradient(x, y)

    def hessian(self, x: float, y: float) -> np.ndarray:
        """Second derivative as edge line integrals against the kernel.

        The increment's distributional Hessian is (jump x normal) per unit
        length on each edge, so the smoothed Hessian at z sums those dyads
        weighted by the kernel mass the edge carries near z.  Exactly zero
        beyond r/2 of every edge.
        """
        z = np.array((x, y))
        out = np.zeros((2, 2))
        half = 0.5 * self.r
        h = self.h
        d = h.p1 - h.p0
        w = z - h.p0
        dd = np.einsum("ij,ij->i", d, d)
        tq = np.clip(np.einsum("ij,ij->i", w, d) / dd, 0.0, 1.0)
        near = np.hypot(*(h.p0 + tq[:, None] * d - z).T) < half
        for i in np.nonzero(near)[0]:
            # clip the parameter range to |z - p0 - t d| <= r/2
            a = dd[i]
            b = -2.0 * float(np.dot(w[i], d[i]))
            c = float(np.dot(w[i], w[i])) - half * half
            disc = b * b - 4.0 * a * c
            if disc <= 0.0:
                continue
            root = math.sqrt(disc)
            t0 = max(0.0, (-b - root) / (2.0 * a))
            t1 = min(1.0, (-b + root) / (2.0 * a))
            if t1 <= t0:
                continue
            # composite panels along the chord: one panel cannot resolve
            # the bump profile across its whole support
            sub = np.linspace(t0, t1, 9)
            t = (sub[:-1, None] + np.diff(sub)[:, None] * _T01_10).ravel()
            tw = (np.diff(sub)[:, None] * _W01_10).ravel()
            pts = h.p0[i] + t[:, None] * d[i]
            rho = self.kernel.value_many((z[0] - pts[:, 0]) / self.r,
                                         (z[1] - pts[:, 1]) / self.r)
            seg = float(np.dot(tw, rho)) * math.sqrt(a)
            out += np.outer(h.delta[i], h.nu[i]) * (seg / self.r ** 2)
        return out


def mollify_increment(h: Increment, r: Optional[float] = None,
                      kernel: Optional[MollifierKernel] = None
                      ) -> MollifiedIncrement:
    """Smooth one increment at its generation's margin scale.

    The default radius is the built inset margin of the generation, which
    keeps the kernel support clear of every deeper component; the default
    kernel is the standard bump.  The kernel is moment-checked first.
    """
    if r is None:
        r = float(cascade.geometry_margins(h.level)[1])
    return MollifiedIncrement(h, r, kernel or standard_kernel())


# ---------------------------------------------------------------------------
# the smoothed profile and its velocity

class SmoothProfile(ScalarField):
    """f_0 plus every mollified increment up to a truncation generation.

    Coincides with the exact profile wherever all increments take their
    affine shortcut: on every component of the next generation, outside
    the first generation's margin collar, and generally at any point half
    a margin away from all jump edges.
    """

    def __init__(self, depth: int, kernel: Optional[MollifierKernel] = None):
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        self.depth = depth
        self.parts = tuple(
            mollify_increment(increment(l), kernel=kernel)
            for l in range(1, depth + 1))
        exact = construction.build_field(depth)
        self.domain = exact.domain
        self.lipschitz_bound = exact.lipschitz_bound

    def value(self, x: float, y: float) -> float:
        return y + sum(p.value(x, y) for p in self.parts)

    def gradient(self, x: float, y: float) -> tuple:
        gx, gy = 0.0, 1.0
        for p in self.parts:
            px, py = p.gradient(x, y)
            gx += px
            gy += py
        return gx, gy

    def hessian(self, x: float, y: float) -> np.ndarray:
        out = np.zeros((2, 2))
        for p in self.parts:
            out += p.hessian(x, y)
        return out


@lru_cache(maxsize=None)
def build_f_smooth(depth: int) -> SmoothProfile:
    return SmoothProfile(depth)


@lru_cache(maxsize=None)
def build_velocity_smooth(depth: int) -> PlanarField:
    """Divergence-free velocity of the smoothed profile.

    Gradient averaging cannot leave the exact profile's gradient range, so
    the exact field's sup-norm and rightward lower bound carry over.  The
    suggested step cap keeps an adaptive integrator from stepping across a
    whole mollified collar at once.
    """
    f = build_f_smooth(depth)
    exact = construction.build_field(depth)
    b = PlanarField(stream=construction._NegatedField(f),
                    sup_norm=exact.sup_gradient_norm(),
                    transversality=Transversality(
                        (1.0, 0.0), float(exact.min_vertical_slope()),
                        f.domain),
                    regularity_tag="smooth",
                    name=f"cascade-smooth-{depth}")
    b.suggested_max_step = float(cascade.geometry_margins(depth)[1]) / 4.0
    return b


# ---------------------------------------------------------------------------
# Sobolev schedule of the smoothed increments

def _first_component_edges(level: int):
    """Edge arrays of one generation component (all are translates)."""
    square = cascade.component_geometry(
        tuple([0] * (level - 1))).square
    x_lo, x_hi = float(square.x_lo), float(square.x_hi)
    y_lo, y_hi = float(square.y_lo), float(square.y_hi)
    keep = []
    for e in construction.generation_jump_edges(level):
        mx = 0.5 * (e.p0[0] + e.p1[0])
        my = 0.5 * (e.p0[1] + e.p1[1])
        if x_lo - 1e-12 <= mx <= x_hi + 1e-12 and \
           y_lo - 1e-12 <= my <= y_hi + 1e-12:
            keep.append(e)
    p0 = np.array([e.p0 for e in keep])
    p1 = np.array([e.p1 for e in keep])
    delta = np.array([e.delta for e in keep])
    nu = np.array([e.nu for e in keep])
    return p0, p1, delta, nu


def _split_segments(p0, p1, max_len):
    """Chop edges into subsegments, keeping the parent edge index."""
    lengths = np.hypot(*(p1 - p0).T)
    seg_p0, seg_p1, owner = [], [], []
    for i in range(len(p0)):
        m = max(1, int(math.ceil(lengths[i] / max_len)))
        t = np.linspace(0.0, 1.0, m + 1)[:, None]
        pts = p0[i] + t * (p1[i] - p0[i])
        seg_p0.append(pts[:-1])
        seg_p1.append(pts[1:])
        owner.append(np.full(m, i))
    return (np.concatenate(seg_p0), np.concatenate(seg_p1),
            np.concatenate(owner))


def correlation_norm_sq(p0, p1, delta, nu, r: float,
                        kernel: Optional[MollifierKernel] = None) -> float:
    """Squared L2 norm of the Hessian of the mollified edge measure sum.

    Expanding |sum_e M_e (rho * edge)|^2 pairs every two edges through the
    kernel's radial autocorrelation phi:

        sum_{e,e'} (delta_e . delta_e')(nu_e . nu_e')
                   integral over e x e' of phi(|xi - xi'|/r) / r^2.

    Pairs farther apart than r contribute nothing (phi's support), so the
    double sum is culled by midpoint distance first.
    """
    kernel = kernel or standard_kernel()
    check_kernel(kernel)
    dgrid, phi = kernel.autocorrelation()
    s0, s1, owner = _split_segments(p0, p1, 0.5 * r)
    mids = 0.5 * (s0 + s1)
    lens = np.hypot(*(s1 - s0).T)
    cut = r + float(lens.max())
    frob = (delta @ delta.T) * (nu @ nu.T)

    pairs_i, pairs_j = [], []
    block = 512
    for a in range(0, len(mids), block):
        chunk = mids[a:a + block]
        d2 = ((chunk[:, None, :] - mids[None, :, :]) ** 2).sum(-1)
        ii, jj = np.nonzero(d2 <= cut * cut)
        keep = (ii + a) <= jj         # unordered pairs incl. self
        pairs_i.append(ii[keep] + a)
        pairs_j.append(jj[keep])
    pi = np.concatenate(pairs_i)
    pj = np.concatenate(pairs_j)

    total = 0.0
    for a in range(0, len(pi), 4096):
        i = pi[a:a + 4096]
        j = pj[a:a + 4096]
        ti = s0[i][:, None, :] + _T01[None, :, None] * (s1[i] - s0[i])[:, None, :]
        tj = s0[j][:, None, :] + _T01[None, :, None] * (s1[j] - s0[j])[:, None, :]
        dist = np.sqrt(((ti[:, :, None, :] - tj[:, None, :, :]) ** 2).sum(-1))
        vals = np.interp(dist / r, dgrid, phi, right=0.0)
        quad = np.einsum("a,b,pab->p", _W01, _W01, vals)
        contrib = quad * lens[i] * lens[j] * frob[owner[i], owner[j]]
        total += float(np.sum(np.where(i == j, contrib, 2.0 * contrib)))
    return total / r ** 2


@dataclass(frozen=True)
class SobolevSchedule:
    """Per-generation Hessian norms of the mollified increments."""
    p: float
    levels: Tuple[int, ...]
    norms: Tuple[float, ...]
    feasible: Tuple[bool, ...]
    method: str

    @property
    def partial_sums(self) -> Tuple[float, ...]:
        out, acc = [], 0.0
        for v in self.norms:
            acc += v
            out.append(acc)
        return tuple(out)

    def cauchy_gap(self, level: int) -> float:
        """Relative growth of the partial sum at one level."""
        i = self.levels.index(level)
        if i == 0:
            return math.inf
        sums = self.partial_sums
        return (sums[i] - sums[i - 1]) / sums[i]

    def csv_rows(self) -> Iterator[Tuple[int, float, float, int]]:
        sums = self.partial_sums
        for i, l in enumerate(self.levels):
            yield l, self.norms[i], sums[i], int(self.feasible[i])


def _hessian_grid_norm(level: int, p: float, max_grid: int,
                       kernel: Optional[MollifierKernel]) -> Tuple[float, bool]:
    """Grid route: sample the pointwise Hessian over one component."""
    r = float(cascade.geometry_margins(level)[1])
    sq = cascade.component_geometry(tuple([0] * (level - 1))).square
    lo_x, hi_x = float(sq.x_lo) - r, float(sq.x_hi) + r
    lo_y, hi_y = float(sq.y_lo) - r, float(sq.y_hi) + r
    n = int(math.ceil((hi_x - lo_x) / (r / 4.0)))
    if n > max_grid:
        return math.nan, False
    part = mollify_increment(increment(level), kernel=kernel)
    xs = np.linspace(lo_x, hi_x, n)
    ys = np.linspace(lo_y, hi_y, n)
    cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
    total = 0.0
    for yy in ys:
        row = 0.0
        for xx in xs:
            hess = part.hessian(xx, yy)
            fro = math.sqrt(float(np.sum(hess * hess)))
            row += fro ** p
        total += row
    total *= cell * 2 ** (level - 1)
    return total ** (1.0 / p), True


def sobolev_schedule(l_max: int, p: float = 2.0, max_grid: int = 2048,
                     kernel: Optional[MollifierKernel] = None
                     ) -> SobolevSchedule:
    """Hessian L^p norms of the mollified increments, one per generation.

    p = 2 uses the exact edge-correlation route (components are translates,
    so one component's norm is computed and scaled by the component count).
    Other p fall back to sampling the pointwise Hessian on a grid fine
    enough to resolve the mollification collar; levels whose grid would
    exceed ``max_grid`` per axis are reported infeasible rather than
    silently under-resolved.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    if p < 1.0:
        raise ValueError("p must be at least 1")
    levels = tuple(range(1, l_max + 1))
    norms, feasible = [], []
    if p == 2.0:
        for l in levels:
            r = float(cascade.geometry_margins(l)[1])
            p0, p1, delta, nu = _first_component_edges(l)
            nsq = correlation_norm_sq(p0, p1, delta, nu, r, kernel)
            norms.append(math.sqrt(nsq * 2 ** (l - 1)))
            feasible.append(True)
        return SobolevSchedule(p=p, levels=levels, norms=tuple(norms),
                               feasible=tuple(feasible),
                               method="edge-correlation")
    for l in levels:
        value, ok = _hessian_grid_norm(l, p, max_grid, kernel)
        norms.append(value)
        feasible.append(ok)
    return SobolevSchedule(p=p, levels=levels, norms=tuple(norms),
                           feasible=tuple(feasible), method="hessian-grid")
