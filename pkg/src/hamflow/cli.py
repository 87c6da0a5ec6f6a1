"""Batch experiment driver: ``hamflow <group> <subcommand> [--flags]``.

Groups: ``flow`` (grid flow maps by Runge-Kutta, level-set walk, or the
exact cascade walker), ``example`` (cascade construction artifacts),
``verify`` (estimate verifiers), ``field`` (definition files and stats).

Every output embeds the tool version and a hash of the semantic
configuration.  The hash covers fields, times, grids, tolerances and
seeds; thread count and output locations are excluded, so reruns that
differ only in ``--threads`` are byte-identical.  Nothing here writes
timestamps or timings into files, for the same reason.

Exit codes: 0 success, 1 estimate violations, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, cascade, construction, fieldio, fields, flow, \
    hamiltonian, mollify, regularity, svgplot
from .errors import (DomainError, HamflowError, NumericalError,
                     ResolutionError, TransversalityError)
from .geometry import AxisRect, Point

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    """Bad flag, config key, or parameter value."""


# ---------------------------------------------------------------------------
# config plumbing

_UNHASHED = ("threads", "out")


def _merge_config(args, defaults: dict) -> dict:
    """Defaults, overlaid by --config file entries, overlaid by flags."""
    cfg = dict(defaults)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in doc.items():
            if k not in cfg:
                raise ConfigError(f"unknown config key {k!r} for this command")
            cfg[k] = v
    for k in cfg:
        v = getattr(args, k.replace("-", "_"), None)
        if v is not None:
            cfg[k] = v
    return cfg


def _config_hash(cfg: dict):
    sem = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    blob = json.dumps(sem, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16], sem


def _positive(cfg: dict, key: str):
    v = cfg[key]
    if not (isinstance(v, (int, float)) and v > 0):
        raise ConfigError(f"{key} must be positive, got {v!r}")


def _nonnegative(cfg: dict, key: str):
    v = cfg[key]
    if not (isinstance(v, (int, float)) and v >= 0):
        raise ConfigError(f"{key} must be >= 0, got {v!r}")


def _power_of_two(cfg: dict, key: str):
    v = cfg[key]
    if not (isinstance(v, int) and v >= 1 and (v & (v - 1)) == 0):
        raise ConfigError(f"{key} must be a power of two, got {v!r}")


def _int_at_least(cfg: dict, key: str, floor: int):
    v = cfg[key]
    if not (isinstance(v, int) and v >= floor):
        raise ConfigError(f"{key} must be an integer >= {floor}, got {v!r}")


def _window_rect(cfg: dict) -> Optional[AxisRect]:
    w = cfg.get("window")
    if w is None:
        return None
    if not (isinstance(w, (list, tuple)) and len(w) == 4):
        raise ConfigError("window takes four numbers: x_lo x_hi y_lo y_hi")
    try:
        return AxisRect(*[float(v) for v in w])
    except ValueError as exc:
        raise ConfigError(f"bad window: {exc}") from None


def _load_field(cfg: dict):
    try:
        return fieldio.load_field(cfg["field"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output plumbing

def _plain(obj):
    """JSON-ready copy: numpy scalars to python, NaN to null, Fractions
    to exact strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if v == v and abs(v) != float("inf") else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return str(v)


class _Outputs:
    """Collects written paths and stamps every file with version + hash."""

    def __init__(self, out_dir: str, chash: str, sem_cfg: dict):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.chash = chash
        self.sem_cfg = sem_cfg
        self.written: List[str] = []

    def csv(self, name: str, header: Sequence[str], rows) -> Path:
        path = self.dir / name
        lines = [f"# hamflow {__version__}", f"# config {self.chash}",
                 ",".join(header)]
        lines.extend(",".join(_cell(c) for c in row) for row in rows)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        self.written.append(name)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.dir / name
        doc = {"version": __version__, "config_hash": self.chash,
               "config": _plain(self.sem_cfg)}
        doc.update(_plain(payload))
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
        self.written.append(name)
        return path

    def svg(self, name: str, plot: svgplot.LinePlot) -> Path:
        path = self.dir / name
        plot.write(path, comment=f"hamflow {__version__} config {self.chash}")
        self.written.append(name)
        return path

    def note(self, msg: str):
        print(msg)

    def done(self) -> None:
        print("wrote: " + " ".join(self.written))


# ---------------------------------------------------------------------------
# worker pool

def _pool_map(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as ex:
        return list(ex.map(fn, items))     # ordered merge


def _row_chunks(n_rows: int, threads: int):
    k = max(1, min(int(threads), n_rows))
    bounds = np.linspace(0, n_rows, k + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _grid_axes(window: AxisRect, n: int):
    xs = np.linspace(window.x_lo, window.x_hi, n + 1)
    ys = np.linspace(window.y_lo, window.y_hi, n + 1)
    return xs, ys


def _walk_flow_map(b, t: float, window: AxisRect, n: int,
                   threads: int) -> flow.FlowMap:
    inner = construction.cascade_inner(b)
    if inner is None:
        raise ConfigError("the walk method needs an exact cascade field")
    xs, ys = _grid_axes(window, n)
    images = np.zeros((n + 1, n + 1, 2))
    fl = np.zeros((n + 1, n + 1), dtype=np.int8)

    def run(rows):
        a, bnd = rows
        img = np.zeros((bnd - a, n + 1, 2))
        flg = np.zeros((bnd - a, n + 1), dtype=np.int8)
        for j, iy in enumerate(range(a, bnd)):
            for ix in range(n + 1):
                try:
                    x1, y1, flag = construction.flow_point(
                        inner, float(xs[ix]), float(ys[iy]), t)
                    img[j, ix] = (x1, y1)
                    flg[j, ix] = (flow.MAP_OK if flag == construction.FLOW_OK
                                  else flow.MAP_EXITED)
                except (ResolutionError, DomainError):
                    img[j, ix] = (xs[ix], ys[iy])
                    flg[j, ix] = flow.MAP_ERROR
        return a, bnd, img, flg

    for a, bnd, img, flg in _pool_map(run, _row_chunks(n + 1, threads), threads):
        images[a:bnd] = img
        fl[a:bnd] = flg
    return flow.FlowMap(origin=Point(window.x_lo, window.y_lo),
                        spacing=(float(xs[1] - xs[0]), float(ys[1] - ys[0])),
                        nx=n + 1, ny=n + 1, t=float(t), method="walk",
                        images=images, flags=fl)


def _threaded_flow_map(b, H, t: float, window: AxisRect, n: int,
                       method: str, tol: float, threads: int) -> flow.FlowMap:
    if method == "walk":
        return _walk_flow_map(b, t, window, n, threads)
    if threads <= 1:
        return flow.flow_map(b, H, t, window, n, method=method, tol=tol)
    xs, ys = _grid_axes(window, n)
    images = np.zeros((n + 1, n + 1, 2))
    fl = np.zeros((n + 1, n + 1), dtype=np.int8)
    if method == "rk":
        def run(rows):
            a, bnd = rows
            gx, gy = np.meshgrid(xs, ys[a:bnd])
            pts = np.stack((gx.ravel(), gy.ravel()), axis=1)
            img, flags = flow.rk_flow_many(b, pts, t, tol=tol)
            return a, bnd, img.reshape(bnd - a, n + 1, 2), \
                flags.reshape(bnd - a, n + 1)
    elif method == "levelset":
        stream = H if H is not None else b.stream
        if stream is None:
            raise ConfigError("the level-set method needs a streamfunction")
        code = {flow.FLOW_OK: flow.MAP_OK,
                flow.FLOW_UNDERFLOW: flow.MAP_UNDERFLOW,
                flow.FLOW_EXITED: flow.MAP_EXITED}

        def run(rows):
            a, bnd = rows
            img = np.zeros((bnd - a, n + 1, 2))
            flg = np.zeros((bnd - a, n + 1), dtype=np.int8)
            for j, iy in enumerate(range(a, bnd)):
                for ix in range(n + 1):
                    zp = Point(float(xs[ix]), float(ys[iy]))
                    try:
                        out = flow.levelset_flow_ex(stream, b, zp, t)
                        img[j, ix] = out.point
                        flg[j, ix] = code[out.flag]
                    except (DomainError, TransversalityError,
                            ResolutionError, NumericalError):
                        img[j, ix] = (zp.x, zp.y)
                        flg[j, ix] = flow.MAP_ERROR
            return a, bnd, img, flg
    else:
        raise ConfigError(f"unknown flow method {method!r}")
    for a, bnd, img, flg in _pool_map(run, _row_chunks(n + 1, threads), threads):
        images[a:bnd] = img
        fl[a:bnd] = flg
    return flow.FlowMap(origin=Point(window.x_lo, window.y_lo),
                        spacing=(float(xs[1] - xs[0]), float(ys[1] - ys[0])),
                        nx=n + 1, ny=n + 1, t=float(t), method=method,
                        images=images, flags=fl)


_FLAG_NAMES = {flow.MAP_OK: "ok", flow.MAP_UNDERFLOW: "underflow",
               flow.MAP_EXITED: "exited", flow.MAP_ERROR: "error"}


def _flag_counts(fm: flow.FlowMap) -> Dict[str, int]:
    return {name: int((fm.flags == code).sum())
            for code, name in sorted(_FLAG_NAMES.items())}


def _conservation(fm: flow.FlowMap, stream, window: AxisRect) -> Optional[float]:
    """Max |H(X(t,z)) - H(z)| over nodes that stayed inside, or None."""
    if stream is None:
        return None
    xs, ys = _grid_axes(window, fm.nx - 1)
    gx, gy = np.meshgrid(xs, ys)
    ok = fm.flags == flow.MAP_OK
    if not ok.any():
        return None
    h0 = stream.value_many(gx[ok].ravel(), gy[ok].ravel())
    h1 = stream.value_many(fm.images[ok][:, 0], fm.images[ok][:, 1])
    return float(np.max(np.abs(np.asarray(h1) - np.asarray(h0))))


# ---------------------------------------------------------------------------
# flow command

_FLOW_DEFAULTS = {"field": "translation", "t": 1.0, "grid": 64,
                  "window": None, "method": "auto", "tol": 1e-9,
                  "seed": 0, "threads": 1, "out": "."}


def cmd_flow(args) -> int:
    cfg = _merge_config(args, _FLOW_DEFAULTS)
    _nonnegative(cfg, "t")
    _positive(cfg, "tol")
    _power_of_two(cfg, "grid")
    _int_at_least(cfg, "threads", 1)
    if cfg["method"] not in ("auto", "rk", "levelset", "both", "walk"):
        raise ConfigError(f"unknown method {cfg['method']!r}")
    b = _load_field(cfg)
    window = _window_rect(cfg) or b.domain
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    method = cfg["method"]
    if method == "auto":
        method = "walk" if construction.cascade_inner(b) is not None else "rk"
    methods = ("rk", "levelset") if method == "both" else (method,)
    maps = {}
    for m in methods:
        maps[m] = _threaded_flow_map(b, b.stream, cfg["t"], window,
                                     cfg["grid"], m, cfg["tol"],
                                     cfg["threads"])
        out.csv(f"flow_map_{m}.csv",
                ("ix", "iy", "x0", "y0", "x1", "y1", "flag"),
                maps[m].csv_rows())

    summary: dict = {"t": cfg["t"], "grid": cfg["grid"],
                     "window": [window.x_lo, window.x_hi,
                                window.y_lo, window.y_hi],
                     "field": b.name, "methods": list(methods),
                     "flags": {m: _flag_counts(fm) for m, fm in maps.items()},
                     "conservation": {}, "compressibility": {}}
    for m, fm in maps.items():
        cons = _conservation(fm, b.stream, window)
        if cons is not None:
            summary["conservation"][m] = cons
        rep = flow.compressibility_check(fm)
        summary["compressibility"][m] = {
            "max_ratio": rep.max_ratio, "min_ratio": rep.min_ratio,
            "cells": rep.cells, "excluded": rep.excluded}
    if method == "both":
        ok = (maps["rk"].flags == flow.MAP_OK) & \
             (maps["levelset"].flags == flow.MAP_OK)
        if ok.any():
            diff = maps["rk"].images[ok] - maps["levelset"].images[ok]
            summary["discrepancy"] = float(np.hypot(diff[:, 0],
                                                    diff[:, 1]).max())
        else:
            summary["discrepancy"] = None
        summary["compared_nodes"] = int(ok.sum())
    out.json("flow_summary.json", summary)
    out.done()
    return EXIT_OK


# ---------------------------------------------------------------------------
# example commands

_BUILD_DEFAULTS = {"n": 3, "grid": 256, "window": [0.0, 1.0, 0.0, 1.0],
                   "seed": 0, "threads": 1, "out": "."}


def cmd_example_build(args) -> int:
    cfg = _merge_config(args, _BUILD_DEFAULTS)
    _int_at_least(cfg, "n", 1)
    _power_of_two(cfg, "grid")
    window = _window_rect(cfg)
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    b = fieldio.make_field(f"cex_n{cfg['n']}")
    inner = construction.cascade_inner(b)
    sampled = fieldio.sample_to_grid(b, window, cfg["grid"])
    name = f"cascade_n{cfg['n']}_grid{cfg['grid']}.json"
    fieldio.save_field(sampled, out.dir / name)
    out.written.append(name)

    reloaded = fieldio.load_field(out.dir / name)
    probes = fields.low_discrepancy_points(window, 128)
    errs = [abs(reloaded.stream.value(x, y) - sampled.stream.value(x, y))
            for x, y in probes]
    rt_err = float(max(errs))
    out.json("build_summary.json", {
        "depth": cfg["n"], "grid": cfg["grid"],
        "window": [window.x_lo, window.x_hi, window.y_lo, window.y_hi],
        "sup_gradient": float(inner.lipschitz_bound),
        "component_count": len(inner.tree.components(cfg["n"])),
        "grid_file": name,
        "round_trip_max_error": rt_err,
        "round_trip_ok": rt_err == 0.0})
    out.done()
    return EXIT_OK


_LADDER_DEFAULTS = {"n": 20, "method": "analytic", "seed": 0,
                    "threads": 1, "out": "."}


def cmd_example_ladder(args) -> int:
    cfg = _merge_config(args, _LADDER_DEFAULTS)
    _int_at_least(cfg, "n", 1)
    if cfg["method"] not in ("analytic", "trajectory"):
        raise ConfigError(f"unknown ladder method {cfg['method']!r}")
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    ladder = construction.crossing_ladder(cfg["n"], method=cfg["method"])
    rows = [(n, float(t1), float(ts), float(tf), float(tt), float(sg))
            for n, t1, ts, tf, tt, sg in ladder.as_rows()]
    out.csv("ladder.csv", ("n", "T1", "Ts", "Tf", "T", "sigma"), rows)
    summary = {"n_max": ladder.n_max, "method": ladder.method,
               "sup_T": float(ladder.T[-1]),
               "sigma": float(ladder.sigma_partials[-1])}
    if ladder.n_max >= 2:
        summary["final_increment"] = float(ladder.T[-1] - ladder.T[-2])
    out.json("ladder_summary.json", summary)
    out.done()
    return EXIT_OK


_TV_DEFAULTS = {"n": 8, "samples": 4096, "svg": None, "seed": 0,
                "threads": 1, "out": "."}


def _witness_graph(depth: int, fill: int):
    heights = set(construction.all_witness_heights(depth, "fast"))
    heights.update(construction.all_witness_heights(depth, "slow"))
    top = cascade.oscillation(1)
    for i in range(fill):
        heights.add(top * Fraction(2 * i + 1, 2 * fill))
    ordered = sorted(heights)
    ys = [float(v) for v in ordered]
    ts = [float(construction.strip_time_exact(v, depth)) for v in ordered]
    return ys, ts


def cmd_example_tv(args) -> int:
    cfg = _merge_config(args, _TV_DEFAULTS)
    _int_at_least(cfg, "n", 3)
    _int_at_least(cfg, "samples", 1)
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    profile = construction.tv_profile(cfg["n"], cfg["samples"])
    rows = [(lvl, profile.level_bounds[lvl])
            for lvl in sorted(profile.level_bounds)]
    out.csv("tv_bounds.csv", ("level", "bound"), rows)

    heights = sorted(set(construction.all_witness_heights(cfg["n"], "fast")
                         + construction.all_witness_heights(cfg["n"], "slow")))
    cap = 512  # keep the table small; heights double per generation
    if len(heights) > cap:
        step = len(heights) / cap
        heights = [heights[int(i * step)] for i in range(cap)]
    clocks = flow.crossing_times(construction.build_velocity(cfg["n"]),
                                 [float(y) for y in heights])
    out.csv("crossings.csv", ("y", "t1", "t2", "T"),
            [(c.y, c.t_enter, c.t_exit, c.transit) for c in clocks])
    out.json("tv_summary.json", {
        "depth": profile.depth,
        "measured_tv": profile.measured_tv,
        "sample_count": profile.sample_count,
        "sup_T": profile.sup_T,
        "fully_resolved": profile.fully_resolved,
        "required_samples": profile.required_samples,
        "all_bounds_met": all(profile.measured_tv >= bound
                              for bound in profile.level_bounds.values())})
    if cfg["svg"]:
        ys, ts = _witness_graph(cfg["n"], min(cfg["samples"], 2048))
        plot = svgplot.LinePlot(title=f"strip crossing time, depth {cfg['n']}",
                                x_label="y", y_label="T(y)")
        plot.add("T", ys, ts)
        out.svg("crossing_time.svg", plot)
    out.done()
    return EXIT_OK


_MOLLIFY_DEFAULTS = {"n": 4, "samples": 4096, "seed": 0,
                     "threads": 1, "out": "."}


def cmd_example_mollify(args) -> int:
    cfg = _merge_config(args, _MOLLIFY_DEFAULTS)
    _int_at_least(cfg, "n", 1)
    _int_at_least(cfg, "samples", 1)
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    kernel = mollify.standard_kernel()
    mollify.check_kernel(kernel)
    b = fieldio.make_field(f"cex_smooth_n{cfg['n']}")
    name = f"cascade_smooth_n{cfg['n']}.json"
    fieldio.save_field(b, out.dir / name)
    out.written.append(name)

    # collar window: the root component square grown past every kernel radius
    geom = cascade.component_geometry(())
    sq = geom.square
    r1 = float(cascade.geometry_margins(1)[1])
    probe = AxisRect(float(sq.x_lo) - 2 * r1, float(sq.x_hi) + 2 * r1,
                     float(sq.y_lo) - 2 * r1, float(sq.y_hi) + 2 * r1)
    stats = fields.field_stats(b, probe, cfg["samples"])
    out.json("mollify_summary.json", {
        "depth": cfg["n"],
        "radii": [float(cascade.geometry_margins(l)[1])
                  for l in range(1, cfg["n"] + 1)],
        "suggested_max_step": getattr(b, "suggested_max_step", None),
        "sup_norm": b.sup_norm,
        "min_b_e1": stats.min_along_e,
        "min_b_e1_positive": stats.min_along_e is not None
                             and stats.min_along_e > 0,
        "probe_window": [probe.x_lo, probe.x_hi, probe.y_lo, probe.y_hi],
        "field_file": name})
    out.done()
    return EXIT_OK


_SOBOLEV_DEFAULTS = {"l": 6, "p": 2.0, "grid": 2048, "svg": None,
                     "seed": 0, "threads": 1, "out": "."}


def cmd_example_sobolev(args) -> int:
    cfg = _merge_config(args, _SOBOLEV_DEFAULTS)
    _int_at_least(cfg, "l", 1)
    _power_of_two(cfg, "grid")
    if not (isinstance(cfg["p"], (int, float)) and cfg["p"] > 1):
        raise ConfigError(f"p must exceed 1, got {cfg['p']!r}")
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    schedule = mollify.sobolev_schedule(cfg["l"], p=float(cfg["p"]),
                                        max_grid=cfg["grid"])
    out.csv("sobolev_schedule.csv",
            ("level", "norm", "partial_sum", "feasible"),
            schedule.csv_rows())
    summary = {"p": schedule.p, "method": schedule.method,
               "levels": list(schedule.levels),
               "all_feasible": all(schedule.feasible),
               "all_finite": all(v == v and v != float("inf")
                                 for v, f in zip(schedule.norms,
                                                 schedule.feasible) if f)}
    if cfg["l"] >= 2:
        summary["cauchy_gap"] = schedule.cauchy_gap(cfg["l"])
    out.json("sobolev_summary.json", summary)
    if cfg["svg"]:
        lv = [l for l, f in zip(schedule.levels, schedule.feasible) if f]
        nm = [v for v, f in zip(schedule.norms, schedule.feasible) if f]
        if nm:
            plot = svgplot.LinePlot(title=f"increment Hessian norms, p={cfg['p']}",
                                    x_label="level", y_label="norm",
                                    log_y=all(v > 0 for v in nm))
            plot.add("norm", lv, nm)
            out.svg("sobolev_schedule.svg", plot)
    out.done()
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify commands

_LIPSCHITZ_DEFAULTS = {"field": "shear", "pairs": 1000, "t": 0.1,
                       "window": None, "svg": None, "seed": 0,
                       "threads": 1, "out": "."}


def cmd_verify_lipschitz(args) -> int:
    cfg = _merge_config(args, _LIPSCHITZ_DEFAULTS)
    _positive(cfg, "t")
    _int_at_least(cfg, "pairs", 1)
    _int_at_least(cfg, "seed", 0)
    b = _load_field(cfg)
    if b.stream is None:
        raise ConfigError("the local verifier needs a streamfunction-backed "
                          "field")
    window = _window_rect(cfg)
    if window is None:
        window = (b.transversality.window if b.transversality is not None
                  else b.domain)
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    report = regularity.verify_local_estimate(
        b, b.stream, window, t_bar=float(cfg["t"]), pairs=cfg["pairs"],
        seed=cfg["seed"])
    out.json("estimate_local.json", {"field": b.name,
                                     "report": report.to_json_dict()})
    if cfg["svg"]:
        out.svg("level_curves.svg", _level_curve_plot(b, window))
    out.note(f"violations={report.violations} tested={report.pairs_tested}")
    out.done()
    return EXIT_VIOLATIONS if report.violations > 0 else EXIT_OK


def _level_curve_plot(b, window: AxisRect) -> svgplot.LinePlot:
    stream = b.stream
    e = b.transversality.e if b.transversality is not None else (1.0, 0.0)
    pts = fields.low_discrepancy_points(window.shrunk(0.02 * window.width), 256)
    hs = np.asarray(stream.value_many(pts[:, 0], pts[:, 1]))
    levels = np.quantile(hs, np.linspace(0.1, 0.9, 7))
    plot = svgplot.LinePlot(title=f"level curves of H ({b.name})",
                            x_label="x", y_label="y")
    for h in levels:
        try:
            curve = hamiltonian.level_curve(stream, float(h), window, e=e)
        except HamflowError:
            continue
        pts = np.asarray(curve.points)
        if len(pts) >= 2:
            plot.add(f"h={h:.3g}", pts[:, 0], pts[:, 1])
    return plot


_GLOBAL_DEFAULTS = {"field": "smooth", "k": 4, "t": 0.5, "pairs": 500,
                    "seed": 0, "threads": 1, "out": "."}


def cmd_verify_global(args) -> int:
    cfg = _merge_config(args, _GLOBAL_DEFAULTS)
    _positive(cfg, "t")
    _int_at_least(cfg, "k", 1)
    _int_at_least(cfg, "pairs", 1)
    _int_at_least(cfg, "seed", 0)
    b = _load_field(cfg)
    if b.stream is None:
        raise ConfigError("the global verifier needs a streamfunction-backed "
                          "field")
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    report = regularity.verify_global_estimate(
        b, b.stream, k=cfg["k"], t=float(cfg["t"]), pairs=cfg["pairs"],
        seed=cfg["seed"])
    out.json("estimate_global.json", {"field": b.name,
                                      "report": report.to_json_dict()})
    out.note(f"violations={report.violations} tested={report.pairs_tested}")
    out.done()
    return EXIT_VIOLATIONS if report.violations > 0 else EXIT_OK


_TVREF_DEFAULTS = {"field": "cex_n8", "t": 2.0, "grid": 256,
                   "window": [-0.75, -0.25, 0.0, 1.0], "tol": 1e-9,
                   "svg": None, "seed": 0, "threads": 1, "out": "."}


def cmd_verify_tv_refinement(args) -> int:
    cfg = _merge_config(args, _TVREF_DEFAULTS)
    _positive(cfg, "t")
    _positive(cfg, "tol")
    _power_of_two(cfg, "grid")
    _int_at_least(cfg, "threads", 1)
    if cfg["grid"] < 8:
        raise ConfigError("grid must be at least 8 for a refinement sweep")
    b = _load_field(cfg)
    window = _window_rect(cfg)
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)

    resolutions = sorted({max(8, cfg["grid"] >> s) for s in (3, 2, 1, 0)})
    method = "walk" if construction.cascade_inner(b) is not None else "rk"

    def tv_at(res: int):
        fm = _threaded_flow_map(b, b.stream, float(cfg["t"]), window, res,
                                method, cfg["tol"], 1)
        norm = regularity.discrete_tv(fm, component=0)
        return res, float(norm), norm.excluded

    rows = _pool_map(tv_at, resolutions, cfg["threads"])
    out.csv("tv_refinement.csv", ("resolution", "tv", "excluded"), rows)
    tvs = [r[1] for r in rows]
    out.json("tv_refinement_summary.json", {
        "field": b.name, "t": cfg["t"], "method": method,
        "window": [window.x_lo, window.x_hi, window.y_lo, window.y_hi],
        "resolutions": [r[0] for r in rows],
        "tv": tvs,
        "monotone_increasing": all(a <= b2 for a, b2 in zip(tvs, tvs[1:]))})
    if cfg["svg"]:
        plot = svgplot.LinePlot(title=f"discrete TV vs resolution ({b.name})",
                                x_label="resolution", y_label="TV")
        plot.add("tv", [float(r[0]) for r in rows], tvs)
        out.svg("tv_refinement.svg", plot)
    out.done()
    return EXIT_OK


# ---------------------------------------------------------------------------
# field commands

_EXPORT_DEFAULTS = {"field": "translation", "dest": None, "seed": 0,
                    "threads": 1, "out": "."}


def cmd_field_export(args) -> int:
    cfg = _merge_config(args, _EXPORT_DEFAULTS)
    b = _load_field(cfg)
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)
    dest = cfg["dest"] or f"{Path(str(cfg['field'])).stem}.json"
    try:
        fieldio.save_field(b, out.dir / dest)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out.written.append(dest)
    out.done()
    return EXIT_OK


_SAMPLE_DEFAULTS = {"field": "shear", "grid": 64, "window": None,
                    "dest": None, "seed": 0, "threads": 1, "out": "."}


def cmd_field_sample(args) -> int:
    cfg = _merge_config(args, _SAMPLE_DEFAULTS)
    _power_of_two(cfg, "grid")
    b = _load_field(cfg)
    if b.stream is None:
        raise ConfigError("only streamfunction-backed fields can be sampled")
    window = _window_rect(cfg) or b.domain
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)
    sampled = fieldio.sample_to_grid(b, window, cfg["grid"])
    dest = cfg["dest"] or f"{sampled.name}.json"
    fieldio.save_field(sampled, out.dir / dest)
    out.written.append(dest)
    out.done()
    return EXIT_OK


_STATS_DEFAULTS = {"field": "translation", "window": None, "samples": 4096,
                   "seed": 0, "threads": 1, "out": "."}


def cmd_field_stats(args) -> int:
    cfg = _merge_config(args, _STATS_DEFAULTS)
    _int_at_least(cfg, "samples", 1)
    b = _load_field(cfg)
    window = _window_rect(cfg) or b.domain
    chash, sem = _config_hash(cfg)
    out = _Outputs(cfg["out"], chash, sem)
    stats = fields.field_stats(b, window, cfg["samples"])
    payload = {"field": b.name,
               "window": [window.x_lo, window.x_hi, window.y_lo, window.y_hi],
               "samples": stats.samples,
               "sup_norm_estimate": stats.sup_norm,
               "declared_sup_norm": b.sup_norm,
               "min_along_e": stats.min_along_e,
               "compressibility": b.compressibility,
               "regularity_tag": b.regularity_tag}
    if b.stream is not None and b.regularity_tag in ("smooth", "grid"):
        payload["divergence_residual"] = fields.divergence_residual(
            b, window, samples=min(256, cfg["samples"]))
    out.json("field_stats.json", payload)
    out.done()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _common_flags(p: argparse.ArgumentParser, svg: bool = False,
                  window: bool = False):
    p.add_argument("--config", help="JSON file of defaults; flags override")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--threads", type=int, help="worker pool size (default 1)")
    p.add_argument("--seed", type=int, help="sample-shuffling seed (default 0)")
    if svg:
        p.add_argument("--svg", action="store_const", const=True,
                       help="also write SVG plots")
    if window:
        p.add_argument("--window", type=float, nargs=4,
                       metavar=("X_LO", "X_HI", "Y_LO", "Y_HI"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hamflow",
        description="flow maps, cascade construction, and regularity "
                    "estimate verifiers for planar divergence-free fields")
    ap.add_argument("--version", action="version",
                    version=f"hamflow {__version__}")
    groups = ap.add_subparsers(dest="group", required=True)

    p = groups.add_parser("flow", help="grid flow maps")
    p.add_argument("--field", help="builtin name or definition file")
    p.add_argument("--t", type=float, help="flow time (default 1.0)")
    p.add_argument("--grid", type=int, help="cells per side, power of two")
    p.add_argument("--method",
                   choices=("auto", "rk", "levelset", "both", "walk"))
    p.add_argument("--tol", type=float, help="integrator tolerance")
    _common_flags(p, window=True)
    p.set_defaults(func=cmd_flow)

    ex = groups.add_parser("example", help="cascade construction artifacts")
    exs = ex.add_subparsers(dest="subcommand", required=True)

    p = exs.add_parser("build", help="build and export a grid sampling")
    p.add_argument("--n", type=int, help="construction depth")
    p.add_argument("--grid", type=int, help="cells per side, power of two")
    _common_flags(p, window=True)
    p.set_defaults(func=cmd_example_build)

    p = exs.add_parser("ladder", help="crossing-time ladder")
    p.add_argument("--n", type=int, help="max generation")
    p.add_argument("--method", choices=("analytic", "trajectory"))
    _common_flags(p)
    p.set_defaults(func=cmd_example_ladder)

    p = exs.add_parser("tv", help="crossing-time total variation")
    p.add_argument("--n", type=int, help="construction depth")
    p.add_argument("--samples", type=int, help="uniform fill heights")
    _common_flags(p, svg=True)
    p.set_defaults(func=cmd_example_tv)

    p = exs.add_parser("mollify", help="smoothed construction summary")
    p.add_argument("--n", type=int, help="construction depth")
    p.add_argument("--samples", type=int, help="transversality samples")
    _common_flags(p)
    p.set_defaults(func=cmd_example_mollify)

    p = exs.add_parser("sobolev-schedule", help="increment Hessian norms")
    p.add_argument("--l", type=int, help="max smoothing level")
    p.add_argument("--p", type=float, help="Lebesgue exponent (default 2)")
    p.add_argument("--grid", type=int, help="grid cap for the p != 2 route")
    _common_flags(p, svg=True)
    p.set_defaults(func=cmd_example_sobolev)

    ver = groups.add_parser("verify", help="estimate verifiers")
    vers = ver.add_subparsers(dest="subcommand", required=True)

    p = vers.add_parser("lipschitz", help="local two-point estimate")
    p.add_argument("--field", help="builtin name or definition file")
    p.add_argument("--pairs", type=int)
    p.add_argument("--t", type=float, help="time horizon t-bar")
    _common_flags(p, svg=True, window=True)
    p.set_defaults(func=cmd_verify_lipschitz)

    p = vers.add_parser("global", help="covering-based two-point estimate")
    p.add_argument("--field", help="builtin name or definition file")
    p.add_argument("--k", type=int, help="speed-floor index")
    p.add_argument("--t", type=float)
    p.add_argument("--pairs", type=int)
    _common_flags(p)
    p.set_defaults(func=cmd_verify_global)

    p = vers.add_parser("tv-refinement", help="discrete TV across resolutions")
    p.add_argument("--field", help="builtin name or definition file")
    p.add_argument("--t", type=float)
    p.add_argument("--grid", type=int, help="finest resolution, power of two")
    p.add_argument("--tol", type=float)
    _common_flags(p, svg=True, window=True)
    p.set_defaults(func=cmd_verify_tv_refinement)

    fl = groups.add_parser("field", help="definition files and stats")
    fls = fl.add_subparsers(dest="subcommand", required=True)

    p = fls.add_parser("export", help="write a definition file")
    p.add_argument("--field", help="builtin name or definition file")
    p.add_argument("--dest", help="output file name")
    _common_flags(p)
    p.set_defaults(func=cmd_field_export)

    p = fls.add_parser("sample", help="sample a field onto a grid file")
    p.add_argument("--field", help="builtin name or definition file")
    p.add_argument("--grid", type=int)
    p.add_argument("--dest", help="output file name")
    _common_flags(p, window=True)
    p.set_defaults(func=cmd_field_sample)

    p = fls.add_parser("stats", help="sampled sup norm and transversality")
    p.add_argument("--field", help="builtin name or definition file")
    p.add_argument("--samples", type=int)
    _common_flags(p, window=True)
    p.set_defaults(func=cmd_field_stats)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hamflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"hamflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"hamflow: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HamflowError as exc:
        print(f"hamflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
