"""Exact geometry and scalars of the nested-cascade construction.

The construction refines the unit square through generations of nested
component squares.  Generation 1 is a single square of side ``c_1 = 1/2``;
every generation-n component contains two generation-(n+1) squares of side
``c_{n+1}``, so generation n has ``2**(n-1)`` components.  Inside a
component of side ``c`` the layout is:

* two vertical *unchanged bands* of width ``c/4`` at the left and right
  edges, where the scalar profile simply continues the parent's affine
  behaviour;
* a middle band of width ``c/2`` holding a full-height *column* of width
  ``q = c_next + 2r`` flanked by two *fan strips* of width ``a`` that
  interpolate between the band profiles;
* the column is cut into six rows, bottom to top
  ``[channel a | block q | channel a | channel a | block q | channel a]``,
  whose heights telescope to ``c`` exactly.  Blocks are squares of side
  ``q`` carrying the *slow* vertical slope ``v_n``; channels carry the
  *fast* slope ``v'_n``.  The two next-generation squares are the blocks
  shrunk by the margin ``r``.

All lengths and slopes are ``fractions.Fraction`` values and every identity
below (packing, oscillation budget, recursion for the per-component
oscillation ``s_n``) holds exactly; floats appear only when a caller
converts for evaluation.  Rational arithmetic matters because ``c_n`` decays
like ``2**-n`` and the differences ``c_n/2 - c_{n+1}`` entering the margins
would cancel catastrophically in floating point by n around 25.

Level-1 exception: the margin formula ``a_n = ((n-1)/2n)(c_n/2 - c_{n+1})``
degenerates to ``a_1 = 0``.  ``level_params`` reports the raw formula
values, while the built geometry uses the override ``a_1 = r_1 = 3/64``
(an equal split of the slack ``(c_1/2 - c_2)/2``), which preserves the
packing identity.  See ``geometry_margins``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Tuple

import mpmath as mp

from .errors import ResolutionError
from .geometry import AxisRect

HALF = Fraction(1, 2)

# Materialized trees are capped; deeper components are reachable one path at
# a time through component_geometry().
MAX_TREE_DEPTH = 16


# ---------------------------------------------------------------------------
# per-generation scalar parameters

@dataclass(frozen=True)
class LevelParams:
    """Side length and raw margin formulas of one generation.

    ``c`` is the component side, ``a`` the fan-strip width, ``r`` the
    shrink margin between a block and the next-generation square inside it.
    ``a`` and ``r`` are the literal formula values; generation 1 geometry
    overrides them (see ``geometry_margins``).
    """

    n: int
    c: Fraction
    a: Fraction
    r: Fraction


def component_side(n: int) -> Fraction:
    """Side length c_n = 1 / (n^2 2^n) of a generation-n component."""
    if n < 1:
        raise ValueError(f"generation index must be >= 1, got {n}")
    return Fraction(1, n * n * 2 ** n)


@lru_cache(maxsize=None)
def level_params(n: int) -> LevelParams:
    c = component_side(n)
    c_next = component_side(n + 1)
    slack = c / 2 - c_next
    a = Fraction(n - 1, 2 * n) * slack
    r = Fraction(1, 2 * n) * slack
    return LevelParams(n=n, c=c, a=a, r=r)


def geometry_margins(n: int) -> Tuple[Fraction, Fraction]:
    """Margins (a, r) actually used by the built geometry.

    Generation 1 splits its slack evenly, a_1 = r_1 = 3/64, because the raw
    formula would give a degenerate zero-width fan strip.  From generation 2
    on these are the formula values.
    """
    p = level_params(n)
    if n == 1:
        both = (p.a + p.r) / 2
        return both, both
    return p.a, p.r


def column_width(n: int) -> Fraction:
    """Width (= block height) q_n = c_{n+1} + 2 r_n of the built column."""
    _, r = geometry_margins(n)
    return component_side(n + 1) + 2 * r


@lru_cache(maxsize=None)
def oscillation(n: int) -> Fraction:
    """Oscillation s_n of the profile across one generation-n component.

    Base s_1 = c_1; recursion 4 s_{n+1} = s_n c_{n+1} / (c_{n+1} + 2 r_n)
    with the raw formula margin r_n.
    """
    if n < 1:
        raise ValueError(f"generation index must be >= 1, got {n}")
    if n == 1:
        return component_side(1)
    prev = n - 1
    c_here = component_side(n)
    return oscillation(prev) * c_here / (4 * (c_here + 2 * level_params(prev).r))


def slow_speed(n: int) -> Fraction:
    """Vertical slope v_n = s_{n+1} / c_{n+1} on generation-n blocks."""
    return oscillation(n + 1) / component_side(n + 1)


def fast_speed(n: int) -> Fraction:
    """Vertical slope v'_n on generation-n channels.

    For n >= 2 this is s_n / (8 a_n).  Generation 1 has no formula value
    (a_1 = 0), so the slope is fixed by the oscillation budget instead:
    the two blocks carry v_1 * q_1 each and the four channels split the
    remainder of s_1, giving v'_1 = 11/6.
    """
    if n == 1:
        a, _ = geometry_margins(1)
        leftover = oscillation(1) - 2 * slow_speed(1) * column_width(1)
        return leftover / (4 * a)
    return oscillation(n) / (8 * level_params(n).a)


def block_oscillation(n: int) -> Fraction:
    """Profile increase across one block row: v_n * q_n (= s_n/4 for n >= 2)."""
    return slow_speed(n) * column_width(n)


def channel_oscillation(n: int) -> Fraction:
    """Profile increase across one channel row: v'_n * a_n (= s_n/8 for n >= 2)."""
    a, _ = geometry_margins(n)
    return fast_speed(n) * a


def channel_fractions(n: int) -> Tuple[Fraction, ...]:
    """Cumulative oscillation fractions at the six row boundaries.

    Returns (u_0, ..., u_6) with u_0 = 0 and u_6 = 1: the fraction of s_n
    accumulated from the component floor to each row boundary.  For n >= 2
    this is (0, 1/8, 3/8, 1/2, 5/8, 7/8, 1); generation 1 differs because
    of its rebudgeted channel slope.
    """
    s = oscillation(n)
    e = channel_oscillation(n) / s
    d = block_oscillation(n) / s
    steps = (e, d, e, e, d, e)
    u = [Fraction(0)]
    for step in steps:
        u.append(u[-1] + step)
    if u[-1] != 1:
        raise AssertionError(f"oscillation budget broken at generation {n}: {u[-1]} != 1")
    return tuple(u)


def sigma(n_terms: int) -> Fraction:
    """Partial product prod_{l=2}^{n_terms} c_l / (c_l + 2 r_{l-1}).

    Strictly decreasing and positive; its limit is the constant relating
    s_n to 4^{1-n} (each recursion step contributes one factor).
    """
    if n_terms < 2:
        raise ValueError("partial products start at two terms")
    prod = Fraction(1)
    for l in range(2, n_terms + 1):
        c = component_side(l)
        prod *= c / (c + 2 * level_params(l - 1).r)
    return prod


def sigma_limit(dps: int = 30) -> float:
    """Limit of the sigma partial products, via the factor closed form.

    2 r_{m} / c_{m+1} = (2m + 1) / m^3 exactly, so
    -log sigma = sum_{m>=1} log1p((2m+1)/m^3), a rapidly converging series.
    """
    with mp.workdps(dps):
        total = mp.nsum(lambda m: mp.log1p((2 * m + 1) / m ** 3), [1, mp.inf])
        return float(mp.exp(-total))


# ---------------------------------------------------------------------------
# component geometry

@dataclass(frozen=True)
class ComponentGeometry:
    """All rectangles of one component, with exact Fraction coordinates.

    ``x_breaks`` holds the six vertical cut positions (component edges,
    unchanged-band edges, column edges); ``y_breaks`` the seven horizontal
    row boundaries, floor to ceiling.  Rectangles are derived from these
    and stored for direct access.  ``children`` are the two next-generation
    component squares (lower, upper).
    """

    level: int
    path: Tuple[int, ...]
    square: AxisRect
    x_breaks: Tuple[Fraction, ...]
    y_breaks: Tuple[Fraction, ...]
    f_bands: Tuple[AxisRect, AxisRect]
    fans: Tuple[AxisRect, AxisRect]
    column: AxisRect
    d_blocks: Tuple[AxisRect, AxisRect]
    e_channels: Tuple[AxisRect, AxisRect, AxisRect, AxisRect]
    children: Tuple[AxisRect, AxisRect]


ROOT_ORIGIN = (Fraction(1, 4), Fraction(0))


@lru_cache(maxsize=None)
def component_origin(path: Tuple[int, ...]) -> Tuple[Fraction, Fraction]:
    """Lower-left corner of the component addressed by a 0/1 descent path.

    The empty path is the generation-1 square; appending 0 descends into
    the lower block's child, 1 into the upper block's child.
    """
    if not path:
        return ROOT_ORIGIN
    if path[-1] not in (0, 1):
        raise ValueError(f"path entries must be 0 or 1, got {path[-1]}")
    px, py = component_origin(path[:-1])
    n = len(path)  # parent generation
    c = component_side(n)
    a, r = geometry_margins(n)
    q = column_width(n)
    return (px + c / 4 + a + r, py + a + r + path[-1] * (2 * a + q))


@lru_cache(maxsize=None)
def component_geometry(path: Tuple[int, ...]) -> ComponentGeometry:
    """Exact rectangle layout of the component addressed by ``path``."""
    n = len(path) + 1
    x0, y0 = component_origin(path)
    c = component_side(n)
    a, r = geometry_margins(n)
    q = column_width(n)
    c_next = component_side(n + 1)

    xs = (x0, x0 + c / 4, x0 + c / 4 + a, x0 + c / 4 + a + q, x0 + 3 * c / 4, x0 + c)
    heights = (a, q, a, a, q, a)
    ys = [y0]
    for h in heights:
        ys.append(ys[-1] + h)
    ys = tuple(ys)
    # packing identity: rows exactly fill the square, column exactly fills
    # the middle band
    assert ys[-1] == y0 + c, f"row heights do not pack at generation {n}"
    assert xs[3] + a == xs[4], f"column does not pack at generation {n}"

    square = AxisRect(x0, x0 + c, y0, y0 + c)
    top = y0 + c
    f_bands = (AxisRect(xs[0], xs[1], y0, top), AxisRect(xs[4], xs[5], y0, top))
    fans = (AxisRect(xs[1], xs[2], y0, top), AxisRect(xs[3], xs[4], y0, top))
    column = AxisRect(xs[2], xs[3], y0, top)
    d_blocks = (AxisRect(xs[2], xs[3], ys[1], ys[2]), AxisRect(xs[2], xs[3], ys[4], ys[5]))
    e_channels = (AxisRect(xs[2], xs[3], ys[0], ys[1]),
                  AxisRect(xs[2], xs[3], ys[2], ys[3]),
                  AxisRect(xs[2], xs[3], ys[3], ys[4]),
                  AxisRect(xs[2], xs[3], ys[5], ys[6]))
    children = (d_blocks[0].shrunk(r), d_blocks[1].shrunk(r))
    assert children[0].width == c_next, f"child side mismatch at generation {n}"

    return ComponentGeometry(level=n, path=path, square=square,
                             x_breaks=xs, y_breaks=ys, f_bands=f_bands,
                             fans=fans, column=column, d_blocks=d_blocks,
                             e_channels=e_channels, children=children)


# ---------------------------------------------------------------------------
# materialized tree

@dataclass(frozen=True)
class CantorTree:
    """Materialized component tree up to a maximum generation.

    ``levels[k]`` lists generation k+1 components in ascending-y (equal to
    lexicographic-path) order.  Scalar tuples are indexed the same way:
    ``s[k]`` is the oscillation of generation k+1.  ``sigma_partials[k]``
    is the partial product with k+2 terms.
    """

    n_max: int
    levels: Tuple[Tuple[ComponentGeometry, ...], ...]
    s: Tuple[Fraction, ...]
    v: Tuple[Fraction, ...]
    v_fast: Tuple[Fraction, ...]
    sigma_partials: Tuple[Fraction, ...]

    def components(self, n: int) -> Tuple[ComponentGeometry, ...]:
        if not 1 <= n <= self.n_max:
            raise ValueError(f"generation {n} outside materialized range 1..{self.n_max}")
        return self.levels[n - 1]

    def component_count(self, n: int) -> int:
        # two children per component, one root: 2^(n-1) at generation n
        if n <= self.n_max:
            return len(self.levels[n - 1])
        return 2 ** (n - 1)

    def to_json_dict(self) -> Dict:
        def rect(rc: AxisRect) -> List[str]:
            return [str(v) for v in rc.as_tuple()]

        out = {"n_max": self.n_max, "levels": []}
        for n in range(1, self.n_max + 1):
            comps = []
            for g in self.levels[n - 1]:
                comps.append({
                    "path": list(g.path),
                    "square": rect(g.square),
                    "f_bands": [rect(rc) for rc in g.f_bands],
                    "fans": [rect(rc) for rc in g.fans],
                    "d_blocks": [rect(rc) for rc in g.d_blocks],
                    "e_channels": [rect(rc) for rc in g.e_channels],
                    "children": [rect(rc) for rc in g.children],
                })
            out["levels"].append({
                "n": n,
                "s": str(self.s[n - 1]),
                "v": str(self.v[n - 1]),
                "v_fast": str(self.v_fast[n - 1]),
                "sigma_partial": str(self.sigma_partials[n - 1]),
                "components": comps,
            })
        return out


def build_tree(n_max: int) -> CantorTree:
    """Materialize all components of generations 1..n_max with their scalars."""
    if n_max < 1:
        raise ValueError("need at least one generation")
    if n_max > MAX_TREE_DEPTH:
        raise ResolutionError(
            f"materialized tree capped at {MAX_TREE_DEPTH} generations "
            f"(2^{n_max - 1} components requested); use component_geometry() "
            "for single deep descents")
    levels = []
    for n in range(1, n_max + 1):
        paths = itertools.product((0, 1), repeat=n - 1)
        levels.append(tuple(component_geometry(p) for p in paths))
    return CantorTree(
        n_max=n_max,
        levels=tuple(levels),
        s=tuple(oscillation(n) for n in range(1, n_max + 1)),
        v=tuple(slow_speed(n) for n in range(1, n_max + 1)),
        v_fast=tuple(fast_speed(n) for n in range(1, n_max + 1)),
        sigma_partials=tuple(sigma(n + 1) for n in range(1, n_max + 1)),
    )
