"""Command-line front end: run scenarios, export traces, report safety checks.

Subcommands:

    run      one scenario -> CSV trace, JSON report, optional SVG plots
    compare  observer-aware vs baseline vehicle run, side-by-side report
    check    built-in safety checks, one PASS/FAIL line each

Exit codes: 0 success, 1 check failure, 2 usage/config error, 3 numeric
failure.  The default output root is $SAFECHAIN_OUT_DIR, falling back to
./out.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import scenarios
from .errors import ConfigError, GainConditionWarning, SafechainError
from .observer import simulate_tracking
from .safety_filter import qp_filter
from .barrier import smooth_bound
from .sim import SimConfig, SimulationTrace, run_closed_loop
from .strict_feedback import get_model, input_from_virtual, nominal_to_virtual

ENV_OUT_DIR = "SAFECHAIN_OUT_DIR"
ENCOUNTER_FACTOR = 1.5


# -- config ------------------------------------------------------------------


def parse_config(path) -> SimConfig:
    """Load a JSON config file, fill scenario defaults, emit gain warnings."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(raw).__name__}")
    if "scenario" not in raw:
        raise ConfigError("config must name a scenario")
    cfg = scenarios.config_from_dict(
        scenarios.merge_config(scenarios.default_config(raw["scenario"]), raw)
    )
    for msg in scenarios.config_warnings(cfg):
        warnings.warn(msg, GainConditionWarning, stacklevel=2)
    return cfg


# -- trace serialization -------------------------------------------------------

_INT_COLUMNS = {"filter_active"}


def write_csv(trace: SimulationTrace, path) -> None:
    """Write the trace as CSV: header row, then one full-precision row per step."""
    path = Path(path)
    int_idx = {i for i, name in enumerate(trace.columns) if name in _INT_COLUMNS}
    with path.open("w", newline="") as fh:
        fh.write(",".join(trace.columns) + "\n")
        for row in trace.data:
            cells = [
                str(int(val)) if i in int_idx else repr(float(val))
                for i, val in enumerate(row)
            ]
            fh.write(",".join(cells) + "\n")


def read_trace_csv(path):
    """Read back a trace CSV as (columns, data); inverse of ``write_csv``."""
    path = Path(path)
    with path.open() as fh:
        columns = tuple(fh.readline().strip().split(","))
        data = np.array([[float(cell) for cell in line.strip().split(",")]
                         for line in fh if line.strip()])
    return columns, data


# -- reporting -----------------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    """Headline numbers of one run."""

    scenario: str
    min_h1: float
    first_violation_time: float | None
    encounters: tuple
    observer_max_steady_error: float | None
    runtime_s: float

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "min_h1": self.min_h1,
            "first_violation_time": self.first_violation_time,
            "encounters": list(self.encounters),
            "observer_max_steady_error": self.observer_max_steady_error,
            "runtime_s": self.runtime_s,
        }


def _encounter_times(t, dist, radius):
    """Times of the local minima of the distance that lie below 1.5*radius.

    Plateau runs count once (at their lowest sample) and minima separated by
    a rise of less than half a percent of the radius are merged into the
    deeper one, so integrator-step chatter never shows up as extra
    encounters.
    """
    thr = ENCOUNTER_FACTOR * radius
    prom = 5e-3 * radius
    kept = []  # indices of accepted minima
    i = 1
    n = len(dist)
    while i < n - 1:
        if dist[i] <= dist[i - 1] and dist[i] <= dist[i + 1] and dist[i] < thr:
            j = i
            while j + 1 < n - 1 and dist[j + 1] == dist[i]:
                j += 1
            low = i + int(np.argmin(dist[i:j + 1]))
            if kept:
                prev = kept[-1]
                rise = float(dist[prev:low + 1].max()) - max(dist[prev], dist[low])
                if rise < prom:
                    if dist[low] < dist[prev]:
                        kept[-1] = low
                    i = j + 1
                    continue
            kept.append(low)
            i = j + 1
        else:
            i += 1
    return tuple(float(t[i]) for i in kept)


def build_report(trace: SimulationTrace, steady_after: float = 2.0) -> RunReport:
    """Pure function of a trace (same trace, same report)."""
    t = trace.col("t")
    h1 = trace.col("h1")
    min_h1 = float(h1.min())
    violations = np.nonzero(h1 < 0.0)[0]
    first_violation = float(t[violations[0]]) if violations.size else None

    encounters = ()
    r_safe = trace.meta.get("r_safe")
    if r_safe is not None and "dist" in trace.columns:
        encounters = _encounter_times(t, trace.col("dist"), r_safe)

    obs_err = None
    has_observer = bool(trace.meta.get("config", {}).get("observer", {}).get("channels"))
    if has_observer and "what1x" in trace.columns and "w1x" in trace.columns:
        err = np.hypot(trace.col("what1x") - trace.col("w1x"),
                       trace.col("what1y") - trace.col("w1y"))
        steady = t >= steady_after
        if steady.any():
            obs_err = float(err[steady].max())

    return RunReport(
        scenario=trace.scenario,
        min_h1=min_h1,
        first_violation_time=first_violation,
        encounters=encounters,
        observer_max_steady_error=obs_err,
        runtime_s=float(trace.meta.get("runtime_s", math.nan)),
    )


def format_report(report: RunReport) -> str:
    lines = [f"scenario               {report.scenario}",
             f"min h1                 {report.min_h1:.6g}"]
    if report.first_violation_time is None:
        lines.append("first violation        none")
    else:
        lines.append(f"first violation        t = {report.first_violation_time:.3f} s")
    if report.encounters:
        enc = ", ".join(f"{e:.2f}" for e in report.encounters)
        lines.append(f"encounters             t = {enc} s")
    if report.observer_max_steady_error is not None:
        lines.append(f"observer steady error  {report.observer_max_steady_error:.3g}")
    lines.append(f"runtime                {report.runtime_s:.2f} s")
    return "\n".join(lines)


# -- SVG rendering --------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, count)


def _panel(series, x_label, y_label, title, width, height, x_off, y_off,
           equal_aspect=False, circles=()):
    """One framed plot as a list of SVG elements.

    ``series`` is a list of (name, xs, ys) triples; ``circles`` of
    (cx, cy, r) in data units (drawn dashed).
    """
    pad_l, pad_r, pad_t, pad_b = 52, 12, 22, 34
    iw, ih = width - pad_l - pad_r, height - pad_t - pad_b
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    for cx, cy, r in circles:
        xs_all = np.append(xs_all, [cx - r, cx + r])
        ys_all = np.append(ys_all, [cy - r, cy + r])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    mx = 0.05 * (x_hi - x_lo)
    my = 0.05 * (y_hi - y_lo)
    x_lo, x_hi, y_lo, y_hi = x_lo - mx, x_hi + mx, y_lo - my, y_hi + my
    sx = iw / (x_hi - x_lo)
    sy = ih / (y_hi - y_lo)
    if equal_aspect:
        sx = sy = min(sx, sy)

    def to_px(x, y):
        return (x_off + pad_l + (x - x_lo) * sx,
                y_off + pad_t + ih - (y - y_lo) * sy)

    el = [f'<rect x="{x_off + pad_l}" y="{y_off + pad_t}" width="{iw}" height="{ih}" '
          f'fill="white" stroke="#444"/>',
          f'<text x="{x_off + pad_l + iw / 2:.1f}" y="{y_off + 15}" font-size="12" '
          f'text-anchor="middle">{title}</text>']
    for tx in _ticks(x_lo + mx, x_hi - mx):
        px, py = to_px(tx, y_lo)
        py = y_off + pad_t + ih
        el.append(f'<line x1="{px:.1f}" y1="{py}" x2="{px:.1f}" y2="{py + 4}" stroke="#444"/>')
        el.append(f'<text x="{px:.1f}" y="{py + 16}" font-size="10" '
                  f'text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(y_lo + my, y_hi - my):
        px, py = to_px(x_lo, ty)
        px = x_off + pad_l
        el.append(f'<line x1="{px - 4}" y1="{py:.1f}" x2="{px}" y2="{py:.1f}" stroke="#444"/>')
        el.append(f'<text x="{px - 6}" y="{py + 3:.1f}" font-size="10" '
                  f'text-anchor="end">{ty:.3g}</text>')
    el.append(f'<text x="{x_off + pad_l + iw / 2:.1f}" y="{y_off + height - 6}" '
              f'font-size="11" text-anchor="middle">{x_label}</text>')
    el.append(f'<text x="{x_off + 14}" y="{y_off + pad_t + ih / 2:.1f}" font-size="11" '
              f'text-anchor="middle" transform="rotate(-90 {x_off + 14} '
              f'{y_off + pad_t + ih / 2:.1f})">{y_label}</text>')

    for idx, (name, xs, ys) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        stride = max(1, len(xs) // 1500)  # sub-pixel detail adds nothing
        if stride > 1:
            keep = np.r_[np.arange(0, len(xs) - 1, stride), len(xs) - 1]
            xs, ys = xs[keep], ys[keep]
        pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in
                       (to_px(float(x), float(y)) for x, y in zip(xs, ys)))
        el.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        lx = x_off + pad_l + iw - 8
        ly = y_off + pad_t + 14 + 13 * idx
        el.append(f'<text x="{lx}" y="{ly}" font-size="10" text-anchor="end" '
                  f'fill="{color}">{name}</text>')
    for cx, cy, r in circles:
        px, py = to_px(cx, cy)
        el.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="{r * sx:.1f}" fill="none" '
                  f'stroke="#d62728" stroke-dasharray="4 3"/>')
    return el


def render_svg(trace: SimulationTrace, kind: str, path) -> None:
    """Write one self-contained SVG plot of a trace.

    Kinds: ``trajectory`` (paths plus safety circles at encounter times;
    vehicle traces only), ``states`` (plant states vs time), ``barrier``
    (barrier levels and filter slack vs time).
    """
    if len(trace) == 0:
        raise ValueError("cannot render an empty trace")
    path = Path(path)
    t = trace.col("t")
    width = 560

    if kind == "trajectory":
        if "xd" not in trace.columns:
            raise ValueError("trajectory plots need a vehicle trace with an obstacle")
        report = build_report(trace)
        circles = []
        for te in report.encounters:
            i = int(np.argmin(np.abs(t - te)))
            circles.append((float(trace.col("xd")[i]), float(trace.col("yd")[i]),
                            float(trace.meta["r_safe"])))
        series = [("vehicle", trace.col("x"), trace.col("y")),
                  ("obstacle", trace.col("xd"), trace.col("yd"))]
        el = _panel(series, "x [m]", "y [m]", f"{trace.scenario}: paths",
                    width, 480, 0, 0, equal_aspect=True, circles=circles)
        height = 480
    elif kind == "states":
        if "x" in trace.columns and "theta" in trace.columns:
            series = [(name, t, trace.col(name)) for name in ("x", "y", "v", "theta")]
        else:
            names = [c for c in trace.columns if c.startswith("x")]
            series = [(name, t, trace.col(name)) for name in names]
        el = _panel(series, "t [s]", "state", f"{trace.scenario}: states",
                    width, 360, 0, 0)
        height = 360
    elif kind == "barrier":
        levels = [c for c in trace.columns if c.startswith("h")]
        el = []
        height = 0
        for name in levels + ["zeta"]:
            el += _panel([(name, t, trace.col(name))], "t [s]", name,
                         f"{trace.scenario}: {name}", width, 220, 0, height)
            height += 220
    else:
        raise ValueError(f"unknown plot kind {kind!r}")

    body = "\n".join(el)
    path.write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" '
        f'fill="#fafafa"/>\n{body}\n</svg>\n'
    )


# -- built-in checks -------------------------------------------------------------


def _check_dorcbf():
    trace = run_closed_loop(scenarios.build_vehicle_scenario("dorcbf"))
    rep = build_report(trace)
    ok = rep.min_h1 >= -1e-3 and len(rep.encounters) >= 2
    ok = ok and any(abs(e - 3.35) <= 0.5 for e in rep.encounters)
    ok = ok and any(abs(e - 5.80) <= 0.5 for e in rep.encounters)
    ok = ok and rep.runtime_s < 5.0
    enc = ", ".join(f"{e:.2f}" for e in rep.encounters)
    return ok, (f"min h1 = {rep.min_h1:.4g}, encounters at [{enc}] s, "
                f"runtime {rep.runtime_s:.2f} s")


def _check_bcbf():
    trace = run_closed_loop(scenarios.build_vehicle_scenario("bcbf"))
    rep = build_report(trace)
    ok = rep.min_h1 < 0.0 and rep.first_violation_time is not None \
        and abs(rep.first_violation_time - 3.35) <= 0.5 and rep.runtime_s < 5.0
    viol = "none" if rep.first_violation_time is None else f"{rep.first_violation_time:.2f} s"
    return ok, f"min h1 = {rep.min_h1:.4g}, first violation {viol}"


def _check_observer():
    out = simulate_tracking(lambda t: 0.5 + 0.3 * math.sin(2.0 * t),
                            lambda0=20.0, lambda1=10.0, k1=10.0, k2=10.0,
                            dt=1e-3, duration=4.0)
    err = np.abs(out["w_hat"] - out["w"])[out["t"] >= 2.0].max()
    return err <= 1e-2, f"max |w_hat - w| after 2 s = {err:.3g}"


def _check_qp():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        v_no = rng.normal(size=2)
        lg = rng.normal(size=2)
        if np.linalg.norm(lg) < 1e-6:
            continue
        res = qp_filter(v_no, rng.normal(), lg, abs(rng.normal()), rng.normal())
        if res.active:
            slack = res.zeta - float(lg @ v_no) + float(lg @ res.v)
            worst = max(worst, abs(slack))
    return worst <= 1e-9, f"max |active-constraint slack| = {worst:.3g}"


def _check_smooth_bound():
    rng = np.random.default_rng(11)
    worst = np.inf
    for _ in range(1000):
        g = rng.normal(size=4)
        w = rng.normal(size=2)
        mu = 10.0 ** rng.uniform(-2, 2)
        worst = min(worst, smooth_bound(g, w, mu)
                    - np.linalg.norm(g) * np.linalg.norm(w))
    return worst >= -1e-12, f"min (bound - product) = {worst:.3g}"


def _check_round_trip():
    model = get_model("worked_example_n3")
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=3)
        u = rng.normal(size=1)
        back = input_from_virtual(model, x, nominal_to_virtual(model, x, u))
        worst = max(worst, float(np.abs(back - u).max()))
    return worst <= 1e-12, f"max round-trip error = {worst:.3g}"


BUILTIN_CHECKS = (
    ("observer-aware run stays safe with both encounters", _check_dorcbf),
    ("baseline run collides near the first encounter", _check_bcbf),
    ("disturbance observer tracks a drifting signal", _check_observer),
    ("active filter lands on the constraint boundary", _check_qp),
    ("smooth margin dominates the norm product", _check_smooth_bound),
    ("input transform round trip is exact", _check_round_trip),
)


def run_checks(quiet: bool = False) -> bool:
    all_ok = True
    for name, fn in BUILTIN_CHECKS:
        ok, detail = fn()
        all_ok = all_ok and ok
        if not quiet or not ok:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok


# -- entry point --------------------------------------------------------------


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(ENV_OUT_DIR) or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _effective_config(args) -> SimConfig:
    """Scenario defaults, overridden by the config file, overridden by flags."""
    file_raw = {}
    if args.config:
        path = Path(args.config)
        try:
            file_raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(file_raw, dict):
            raise ConfigError("config root must be a JSON object")

    scenario = args.scenario or file_raw.get("scenario")
    if not scenario:
        raise ConfigError("either --scenario or a config file naming one is required")

    raw = scenarios.merge_config(scenarios.default_config(scenario), file_raw)
    raw["scenario"] = scenario
    if args.dt is not None:
        raw["dt"] = args.dt
    if args.duration is not None:
        raw["duration"] = args.duration

    cfg = scenarios.config_from_dict(raw)
    for msg in scenarios.config_warnings(cfg):
        warnings.warn(msg, GainConditionWarning, stacklevel=2)
    return cfg


def _write_artifacts(trace, out_dir: Path, svg: bool, quiet: bool):
    base = trace.scenario
    write_csv(trace, out_dir / f"{base}.csv")
    report = build_report(trace)
    (out_dir / f"{base}_report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if svg:
        kinds = ["states", "barrier"]
        if "xd" in trace.columns:
            kinds.insert(0, "trajectory")
        for kind in kinds:
            render_svg(trace, kind, out_dir / f"{base}_{kind}.svg")
    if not quiet:
        print(format_report(report))
        print(f"artifacts written to {out_dir}/")
    return report


def _cmd_run(args) -> int:
    cfg = _effective_config(args)
    trace = run_closed_loop(cfg)
    _write_artifacts(trace, _out_dir(args), args.svg, args.quiet)
    return 0


def _cmd_compare(args) -> int:
    out_dir = _out_dir(args)
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.duration is not None:
        overrides["duration"] = args.duration
    reports = {}
    for mode in ("dorcbf", "bcbf"):
        cfg = scenarios.build_vehicle_scenario(mode, overrides or None)
        trace = run_closed_loop(cfg)
        reports[mode] = _write_artifacts(trace, out_dir, args.svg, quiet=True)
    if not args.quiet:
        print(f"{'':24s}{'observer-aware':>18s}{'baseline':>18s}")
        d, b = reports["dorcbf"], reports["bcbf"]
        print(f"{'min h1':24s}{d.min_h1:>18.4g}{b.min_h1:>18.4g}")
        dv = "none" if d.first_violation_time is None else f"{d.first_violation_time:.2f} s"
        bv = "none" if b.first_violation_time is None else f"{b.first_violation_time:.2f} s"
        print(f"{'first violation':24s}{dv:>18s}{bv:>18s}")
        de = ", ".join(f"{e:.2f}" for e in d.encounters) or "none"
        be = ", ".join(f"{e:.2f}" for e in b.encounters) or "none"
        print(f"{'encounters [s]':24s}{de:>18s}{be:>18s}")
        print(f"artifacts written to {out_dir}/")
    return 0


def _cmd_check(args) -> int:
    return 0 if run_checks(quiet=args.quiet) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="safechain",
        description="Safety-filtered simulation of perturbed strict-feedback systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${ENV_OUT_DIR} or ./out)")
    common.add_argument("--svg", action="store_true", help="also render SVG plots")
    common.add_argument("--quiet", action="store_true", help="suppress report output")
    common.add_argument("--dt", type=float, help="override the integration step")
    common.add_argument("--duration", type=float, help="override the run length [s]")

    p_run = sub.add_parser("run", parents=[common], help="run one scenario")
    p_run.add_argument("--scenario", help=f"one of {', '.join(scenarios.SCENARIO_KEYS)}")
    p_run.add_argument("--config", help="JSON config file (flags override it)")
    p_run.set_defaults(fn=_cmd_run)

    p_cmp = sub.add_parser("compare", parents=[common],
                           help="run both vehicle scenarios and compare")
    p_cmp.set_defaults(fn=_cmd_compare)

    p_chk = sub.add_parser("check", help="run the built-in safety checks")
    p_chk.add_argument("--quiet", action="store_true", help="print failures only")
    p_chk.set_defaults(fn=_cmd_check)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SafechainError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
