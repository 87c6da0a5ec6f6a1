"""Embedded adaptive Runge-Kutta pair (Dormand-Prince 5(4)).

Hand-rolled rather than delegated: the verifiers need a step controller
whose accept/reject sequence is a pure function of the inputs, stable
across library versions and thread counts, and the batch variant must step
every trajectory with the same per-point rule so a grid run reproduces the
single-start run.  FSAL evaluation is used, 6 fresh stages per step.

The controller is the classic one: error measured in a mixed
absolute/relative norm, step scaled by 0.9 * err**(-1/5), clipped to
[0.2, 5] per step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericalError

# Butcher tableau, classic Dormand-Prince coefficients
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
# fifth-order minus embedded fourth-order weights (k7 = f at the new point)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ORDER_EXP = -1.0 / 5.0

FLAG_OK = "ok"
FLAG_UNDERFLOW = "underflow"


@dataclass(frozen=True)
class RkResult:
    y: np.ndarray
    t: float
    steps: int
    rejected: int
    flag: str


def _error_norm(err, y0, y1, tol):
    scale = tol + tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def integrate(f: Callable, t0: float, y0, t1: float, tol: float = 1e-9,
              max_step: Optional[float] = None, max_steps: int = 1_000_000,
              observer: Optional[Callable] = None) -> RkResult:
    """Advance y' = f(t, y) from (t0, y0) to t1.

    Forward time only (t1 >= t0).  On step-size underflow (the field is too
    rough at the current point) integration stops early and the result
    carries the reached time and the "underflow" flag.

    ``observer(t, y, dy)``, when given, is called at the initial state and
    after every accepted step; dy is the field value at (t, y), so the
    recorded nodes support cubic Hermite reconstruction of the path.
    """
    if t1 < t0:
        raise ValueError("integration runs forward in time")
    y = np.asarray(y0, dtype=float).copy()
    if t1 == t0:
        return RkResult(y=y, t=t0, steps=0, rejected=0, flag=FLAG_OK)
    span = t1 - t0
    cap = span if max_step is None else min(span, max_step)
    h = min(cap, span / 100.0)
    t = t0
    k1 = np.asarray(f(t, y), dtype=float)
    if observer is not None:
        observer(t, y.copy(), k1.copy())
    steps = rejected = 0
    tiny = 1e-14 * max(1.0, abs(t1))
    while t < t1:
        if steps + rejected >= max_steps:
            raise NumericalError(f"step budget exhausted at t={t}")
        remaining = t1 - t
        if remaining <= tiny:  # within float resolution of the target time
            t = t1
            break
        h = min(h, remaining)
        if h < tiny:  # shrunk this far by rejections: genuine underflow
            return RkResult(y=y, t=t, steps=steps, rejected=rejected,
                            flag=FLAG_UNDERFLOW)
        ks = [k1]
        for i in range(1, 6):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(np.asarray(f(t + _C[i] * h, yi), dtype=float))
        y_new = y + h * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
        k7 = np.asarray(f(t + h, y_new), dtype=float)
        err = h * sum(e * k for e, k in zip(_E, ks + [k7]) if e != 0.0)
        norm = _error_norm(err, y, y_new, tol)
        if norm <= 1.0:
            t += h
            y = y_new
            k1 = k7
            steps += 1
            if observer is not None:
                observer(t, y.copy(), k1.copy())
            factor = _MAX_FACTOR if norm == 0.0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * norm ** _ORDER_EXP))
        else:
            rejected += 1
            factor = max(_MIN_FACTOR, _SAFETY * norm ** _ORDER_EXP)
        h = min(cap, h * factor)
    return RkResult(y=y, t=t, steps=steps, rejected=rejected, flag=FLAG_OK)


@dataclass(frozen=True)
class RkBatchResult:
    y: np.ndarray          # (N, d) final states
    t: np.ndarray          # (N,) reached times
    flags: np.ndarray      # (N,) 0 = ok, 1 = underflow
    steps: int             # sweeps of the lockstep loop


def integrate_batch(f_many: Callable, t0: float, y0: np.ndarray, t1: float,
                    tol: float = 1e-9, max_step: Optional[float] = None,
                    max_sweeps: int = 1_000_000) -> RkBatchResult:
    """Batch variant: N independent trajectories advanced in lockstep.

    ``f_many(t_array, Y)`` maps (N,), (N, d) to (N, d).  Each point keeps
    its own step size and accept/reject record; points never influence each
    other, so results match point-by-point runs of the scalar controller.
    """
    if t1 < t0:
        raise ValueError("integration runs forward in time")
    Y = np.array(y0, dtype=float, copy=True)
    n = Y.shape[0]
    t = np.full(n, float(t0))
    flags = np.zeros(n, dtype=np.int8)
    if t1 == t0:
        return RkBatchResult(y=Y, t=t, flags=flags, steps=0)
    span = t1 - t0
    cap = span if max_step is None else min(span, max_step)
    h = np.full(n, min(cap, span / 100.0))
    k1 = np.asarray(f_many(t, Y), dtype=float)
    tiny = 1e-14 * max(1.0, abs(t1))
    active = t < t1
    sweeps = 0
    while active.any():
        if sweeps >= max_sweeps:
            raise NumericalError("sweep budget exhausted")
        sweeps += 1
        idx = np.nonzero(active)[0]
        rem = t1 - t[idx]
        finished = rem <= tiny  # within float resolution of the target time
        if finished.any():
            done = idx[finished]
            t[done] = t1
            active[done] = False
            keep = ~finished
            idx, rem = idx[keep], rem[keep]
            if idx.size == 0:
                continue
        ta, ya, ha, k1a = t[idx], Y[idx], h[idx], k1[idx]
        ha = np.minimum(ha, rem)
        dead = ha < tiny  # shrunk this far by rejections: genuine underflow
        if dead.any():
            gone = idx[dead]
            flags[gone] = 1
            active[gone] = False
            keep = ~dead
            idx, ta, ya, ha, k1a = idx[keep], ta[keep], ya[keep], ha[keep], k1a[keep]
            if idx.size == 0:
                continue
        hcol = ha[:, None]
        ks = [k1a]
        for i in range(1, 6):
            yi = ya + hcol * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(np.asarray(f_many(ta + _C[i] * ha, yi), dtype=float))
        y_new = ya + hcol * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
        k7 = np.asarray(f_many(ta + ha, y_new), dtype=float)
        err = hcol * sum(e * k for e, k in zip(_E, ks + [k7]) if e != 0.0)
        scale = tol + tol * np.maximum(np.abs(ya), np.abs(y_new))
        norm = np.sqrt(np.mean((err / scale) ** 2, axis=1))
        ok = norm <= 1.0
        factor = np.where(norm == 0.0, _MAX_FACTOR,
                          _SAFETY * np.maximum(norm, 1e-300) ** _ORDER_EXP)
        factor = np.clip(factor, _MIN_FACTOR, _MAX_FACTOR)
        acc = idx[ok]
        if acc.size:
            t[acc] = ta[ok] + ha[ok]
            Y[acc] = y_new[ok]
            k1[acc] = k7[ok]
        h[idx] = np.minimum(cap, ha * factor)
        done = idx[t[idx] >= t1]
        active[done] = False
    return RkBatchResult(y=Y, t=t, flags=flags, steps=sweeps)
