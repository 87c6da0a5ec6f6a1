"""Scalar root-finding and line-search kernels.

Both routines run a fixed, input-independent iteration count so results are
bit-reproducible across runs and thread counts.  Bisection is chosen over
Newton because the functions we invert (streamfunction sections, cumulative
travel times) are merely Lipschitz: derivative-based methods can stall on
the piecewise-affine cascade field, while 64 halvings always land within
2**-64 of the bracket width.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import NumericalError

BISECT_ITERATIONS = 64

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def bisect(f: Callable[[float], float], lo: float, hi: float,
           iterations: int = BISECT_ITERATIONS) -> float:
    """Root of a continuous sign-changing function on [lo, hi]."""
    if not lo < hi:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise NumericalError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:  # bracket at float resolution
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (fhi > 0.0):
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def golden_minimize(f: Callable[[float], float], lo: float, hi: float,
                    tol: float = 1e-10) -> float:
    """Argmin of a unimodal function on [lo, hi] by golden-section search.

    The iteration count is fixed by the bracket and tol up front, never by
    observed values, so the probe sequence is deterministic.
    """
    if not lo < hi:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    span = hi - lo
    if span <= tol:
        return 0.5 * (lo + hi)
    steps = int(math.ceil(math.log(tol / span) / math.log(_INV_PHI)))
    a, b = lo, hi
    c = a + _INV_PHI2 * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(steps):
        if fc < fd:
            b, d, fd = d, c, fc
            c = a + _INV_PHI2 * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)
