"""Scenario files, result serialization, SVG plots, and the command line.

A scenario is a single JSON document (schema 1, per-unit quantities)
declaring the base, the frequency grid, the network and the analyses that
may be run on it.  Loading is total: a file either yields a fully
validated Scenario (black-box tables pre-loaded) or a structured error
listing every violated constraint.

Results are flat tables written as RFC-4180-style CSV at 17 significant
digits, so re-parsing reproduces every float exactly.  Run metadata
(scenario hash, analysis, timestamp) stays in memory; output files carry
data only and are byte-identical across runs and thread counts.

SVG emission is deliberately dependency-free: log-frequency line charts
with one path per column, and equal-aspect Nyquist planes with (-1, 0)
marked.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
import time
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import network as net
from . import passivity, stability
from .devices import (
    BlackBoxModel,
    DeviceModel,
    GflConverterL1,
    GflParams,
    GfmConverterL1,
    GfmParams,
    OperatingPoint,
    RlBranch,
    ShuntCapacitor,
    TheveninGrid,
    read_blackbox_table,
)
from .errors import (
    NumericalFailure,
    ScenarioParseError,
    ScenarioValidationError,
    UnknownComponentError,
    ValidationFailure,
)

ANALYSES = (
    "device-passivity",
    "device-sens",
    "nodal-passivity",
    "nodal-sens",
    "participation",
    "gnc",
    "fdpf",
    "modes",
)

_MODEL_KINDS = ("rl", "shunt_c", "thevenin", "gfl_l1", "gfm_l1", "blackbox")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated analysis configuration."""

    name: str
    s_base_va: float
    v_base_v: float
    f_base_hz: float
    omega_b: float
    omegas: np.ndarray
    network: net.Network
    standalone_stable: bool
    analyses: dict
    source_hash: str


@dataclass(frozen=True, eq=False)
class ResultTable:
    """Column-named numeric table; meta is never serialized."""

    name: str
    columns: tuple[str, ...]
    rows: np.ndarray  # (n_rows, n_columns) float
    meta: dict

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, len(self.columns))
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise ValueError(f"rows shape {rows.shape} does not match {len(self.columns)} columns")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "columns", tuple(self.columns))


# --- scenario loading -------------------------------------------------------

def _num(doc, key, ctx, violations, required=True, positive=False):
    if key not in doc:
        if required:
            violations.append(f"{ctx}: missing required field {key!r}")
        return None
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        violations.append(f"{ctx}.{key}: expected a number, got {type(v).__name__}")
        return None
    v = float(v)
    if not math.isfinite(v):
        violations.append(f"{ctx}.{key}: must be finite")
        return None
    if positive and v <= 0:
        violations.append(f"{ctx}.{key}: must be positive, got {v!r}")
        return None
    return v


def _str(doc, key, ctx, violations, required=True):
    if key not in doc:
        if required:
            violations.append(f"{ctx}: missing required field {key!r}")
        return None
    v = doc[key]
    if not isinstance(v, str) or not v:
        violations.append(f"{ctx}.{key}: expected a non-empty string")
        return None
    return v


def _params_from(doc, cls, ctx, violations):
    """Build a parameter dataclass from a JSON object, defaulting missing
    fields and rejecting unknown or non-numeric ones."""
    known = {f.name for f in fields(cls)}
    given = doc.get("params", {})
    if not isinstance(given, dict):
        violations.append(f"{ctx}.params: expected an object")
        return None
    out = {}
    ok = True
    for key, value in given.items():
        if key not in known:
            violations.append(f"{ctx}.params.{key}: unknown parameter (known: {', '.join(sorted(known))})")
            ok = False
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(float(value)):
            violations.append(f"{ctx}.params.{key}: expected a finite number")
            ok = False
            continue
        out[key] = float(value)
    return cls(**out) if ok else None


def _operating_point(doc, ctx, omega_b, violations):
    op = doc.get("op")
    if not isinstance(op, dict):
        violations.append(f"{ctx}: converter models need an \"op\" object with p, q, v")
        return None
    p = _num(op, "p", f"{ctx}.op", violations)
    q = _num(op, "q", f"{ctx}.op", violations)
    v = _num(op, "v", f"{ctx}.op", violations, positive=True)
    if None in (p, q, v):
        return None
    return OperatingPoint.from_terminal(p, q, v, omega_b)


def _build_model(doc, ctx, omega_b, base_dir, violations) -> DeviceModel | None:
    kind = _str(doc, "kind", ctx, violations)
    if kind is None:
        return None
    if kind not in _MODEL_KINDS:
        violations.append(f"{ctx}.kind: unknown model kind {kind!r} (known: {', '.join(_MODEL_KINDS)})")
        return None
    try:
        if kind == "rl":
            params = doc.get("params", {})
            r = _num(params, "r", f"{ctx}.params", violations)
            x = _num(params, "x", f"{ctx}.params", violations)
            if None in (r, x):
                return None
            return RlBranch(r=r, x=x, omega_b=omega_b)
        if kind == "shunt_c":
            b = _num(doc.get("params", {}), "b", f"{ctx}.params", violations, positive=True)
            return ShuntCapacitor(b=b, omega_b=omega_b) if b is not None else None
        if kind == "thevenin":
            params = doc.get("params", {})
            scr = _num(params, "scr", f"{ctx}.params", violations, positive=True)
            xr = _num(params, "xr_ratio", f"{ctx}.params", violations, positive=True)
            if None in (scr, xr):
                return None
            return TheveninGrid(scr=scr, xr_ratio=xr, omega_b=omega_b)
        if kind == "gfl_l1":
            params = _params_from(doc, GflParams, ctx, violations)
            op = _operating_point(doc, ctx, omega_b, violations)
            if params is None or op is None:
                return None
            return GflConverterL1(params=params, op=op)
        if kind == "gfm_l1":
            params = _params_from(doc, GfmParams, ctx, violations)
            op = _operating_point(doc, ctx, omega_b, violations)
            if params is None or op is None:
                return None
            return GfmConverterL1(params=params, op=op)
        # blackbox: table loaded now so later evaluation cannot hit I/O
        rel = _str(doc, "path", ctx, violations)
        if rel is None:
            return None
        return read_blackbox_table(base_dir / rel)
    except ValidationFailure as exc:
        violations.append(f"{ctx}: {exc}")
        return None
    except ValueError as exc:
        violations.append(f"{ctx}: {exc}")
        return None


def _build_grid(doc, violations) -> np.ndarray | None:
    grid = doc.get("grid")
    if not isinstance(grid, dict):
        violations.append("grid: missing or not an object")
        return None
    keys = [k for k in ("freqs_hz", "points", "points_per_decade") if k in grid]
    if "freqs_hz" in grid:
        freqs = grid["freqs_hz"]
        if (not isinstance(freqs, list) or len(freqs) < 2
                or not all(isinstance(f, (int, float)) and not isinstance(f, bool) for f in freqs)):
            violations.append("grid.freqs_hz: expected a list of at least 2 numbers")
            return None
        arr = np.asarray(freqs, dtype=float)
        if np.any(arr <= 0) or np.any(np.diff(arr) <= 0):
            violations.append("grid.freqs_hz: must be positive and strictly increasing")
            return None
        return 2.0 * math.pi * arr
    f_min = _num(grid, "f_min_hz", "grid", violations, positive=True)
    f_max = _num(grid, "f_max_hz", "grid", violations, positive=True)
    if f_min is None or f_max is None:
        return None
    if not f_min < f_max:
        violations.append(f"grid: f_min_hz ({f_min!r}) must be below f_max_hz ({f_max!r})")
        return None
    if len(keys) != 1:
        violations.append("grid: give exactly one of freqs_hz, points, points_per_decade")
        return None
    if "points" in grid:
        pts = _num(grid, "points", "grid", violations, positive=True)
        if pts is None:
            return None
        points = int(pts)
    else:
        ppd = _num(grid, "points_per_decade", "grid", violations, positive=True)
        if ppd is None:
            return None
        points = max(2, round(ppd * math.log10(f_max / f_min)) + 1)
    if points < 2:
        violations.append("grid.points: need at least 2")
        return None
    return passivity.log_omega_grid(f_min, f_max, points)


def load_scenario(path) -> Scenario:
    """Parse and fully validate a scenario file.

    Raises ScenarioParseError for broken JSON and ScenarioValidationError
    carrying every violated constraint otherwise.
    """
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ScenarioParseError(f"{path}: not valid UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioValidationError([f"{path}: top level must be a JSON object"])

    violations: list[str] = []
    if doc.get("schema") != 1:
        violations.append(f"schema: expected 1, got {doc.get('schema')!r}")
    name = doc.get("name") or p.stem

    base = doc.get("base")
    s_va = v_v = f_hz = None
    if not isinstance(base, dict):
        violations.append("base: missing or not an object (need s_va, v_v, f_hz)")
    else:
        s_va = _num(base, "s_va", "base", violations, positive=True)
        v_v = _num(base, "v_v", "base", violations, positive=True)
        f_hz = _num(base, "f_hz", "base", violations, positive=True)
    omega_b = 2.0 * math.pi * f_hz if f_hz else 2.0 * math.pi * 60.0

    omegas = _build_grid(doc, violations)

    buses = doc.get("buses")
    if (not isinstance(buses, list) or not buses
            or not all(isinstance(b, str) and b for b in buses)):
        violations.append("buses: expected a non-empty list of names")
        buses = []
    elif len(set(buses)) != len(buses):
        violations.append("buses: names must be unique")

    bus_set = set(buses)

    def check_bus(owner_ctx, bus):
        if bus is not None and bus_set and bus not in bus_set:
            violations.append(f"{owner_ctx}: unknown bus {bus!r}")

    branches = []
    for k, item in enumerate(doc.get("branches", []) or []):
        ctx = f"branches[{k}]"
        if not isinstance(item, dict):
            violations.append(f"{ctx}: expected an object")
            continue
        from_bus = _str(item, "from", ctx, violations)
        to_bus = _str(item, "to", ctx, violations)
        check_bus(ctx, from_bus)
        check_bus(ctx, to_bus)
        if from_bus is not None and from_bus == to_bus:
            violations.append(f"{ctx}: endpoints must differ")
        model = _build_model(item, ctx, omega_b, p.parent, violations)
        if None not in (from_bus, to_bus, model) and from_bus != to_bus:
            branches.append(net.Branch(from_bus=from_bus, to_bus=to_bus, model=model))

    shunts = []
    shunt_buses = set()
    for k, item in enumerate(doc.get("shunts", []) or []):
        ctx = f"shunts[{k}]"
        if not isinstance(item, dict):
            violations.append(f"{ctx}: expected an object")
            continue
        bus = _str(item, "bus", ctx, violations)
        check_bus(ctx, bus)
        if bus in shunt_buses:
            violations.append(f"{ctx}: more than one shunt at bus {bus!r}; merge them")
        shunt_buses.add(bus)
        model = _build_model(item, ctx, omega_b, p.parent, violations)
        if bus is not None and model is not None and bus in bus_set:
            shunts.append(net.Shunt(bus=bus, model=model))

    devices = []
    device_names = set()
    for k, item in enumerate(doc.get("devices", []) or []):
        ctx = f"devices[{k}]"
        if not isinstance(item, dict):
            violations.append(f"{ctx}: expected an object")
            continue
        bus = _str(item, "bus", ctx, violations)
        dev_name = _str(item, "name", ctx, violations)
        check_bus(ctx, bus)
        if dev_name in device_names:
            violations.append(f"{ctx}: duplicate device name {dev_name!r}")
        device_names.add(dev_name)
        model = _build_model(item, ctx, omega_b, p.parent, violations)
        if None not in (bus, dev_name, model) and bus in bus_set:
            devices.append(net.Device(bus=bus, name=dev_name, model=model))

    standalone = doc.get("standalone_stable", False)
    if not isinstance(standalone, bool):
        violations.append("standalone_stable: expected true or false")
        standalone = False

    network = None
    if not violations:
        try:
            network = net.Network(buses=tuple(buses), branches=tuple(branches),
                                  shunts=tuple(shunts), devices=tuple(devices))
        except (ValidationFailure, ValueError) as exc:
            violations.append(f"network: {exc}")

    analyses = doc.get("analyses", {})
    if not isinstance(analyses, dict):
        violations.append("analyses: expected an object keyed by analysis name")
        analyses = {}
    else:
        for aname, opts in analyses.items():
            ctx = f"analyses.{aname}"
            if aname not in ANALYSES:
                violations.append(f"{ctx}: unknown analysis (known: {', '.join(ANALYSES)})")
                continue
            if not isinstance(opts, dict):
                violations.append(f"{ctx}: expected an options object")
                continue
            if network is not None:
                _check_analysis_options(aname, opts, ctx, network, violations)

    if violations:
        raise ScenarioValidationError(violations)

    return Scenario(
        name=name,
        s_base_va=s_va,
        v_base_v=v_v,
        f_base_hz=f_hz,
        omega_b=omega_b,
        omegas=omegas,
        network=network,
        standalone_stable=standalone,
        analyses=analyses,
        source_hash=hashlib.sha256(raw).hexdigest(),
    )


def _check_analysis_options(aname, opts, ctx, network, violations):
    device_names = {d.name for d in network.devices}
    component_names = {ref.name for ref in net.components(network)}

    def need_device():
        dev = opts.get("device")
        if not isinstance(dev, str) or dev not in device_names:
            violations.append(f"{ctx}.device: expected one of {sorted(device_names)}, got {dev!r}")
            return None
        return dev

    def need_param(model):
        par = opts.get("param")
        if model is None:
            return
        if not isinstance(par, str) or par not in model.param_names():
            violations.append(
                f"{ctx}.param: expected one of {sorted(model.param_names())}, got {par!r}")

    if aname == "device-passivity":
        need_device()
    elif aname == "device-sens":
        dev = need_device()
        if dev is not None:
            model = next(d.model for d in network.devices if d.name == dev)
            need_param(model)
        delta = opts.get("delta_pct", 5.0)
        if isinstance(delta, bool) or not isinstance(delta, (int, float)) or delta == 0:
            violations.append(f"{ctx}.delta_pct: expected a nonzero number")
    elif aname == "nodal-sens":
        comp = opts.get("component")
        if not isinstance(comp, str) or comp not in component_names:
            violations.append(
                f"{ctx}.component: expected one of {sorted(component_names)}, got {comp!r}")
        else:
            need_param(net.component(network, comp).model)
    elif aname == "fdpf":
        f = opts.get("f_hz")
        if isinstance(f, bool) or not isinstance(f, (int, float)) or not f > 0:
            violations.append(f"{ctx}.f_hz: expected a positive number")
    # participation, nodal-passivity, gnc, modes need no extra options


# --- analysis dispatch ------------------------------------------------------

def _meta(scenario: Scenario, analysis: str) -> dict:
    return {
        "scenario": scenario.name,
        "scenario_hash": scenario.source_hash,
        "analysis": analysis,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }


def _device_model(scenario: Scenario, name: str) -> DeviceModel:
    for dev in scenario.network.devices:
        if dev.name == name:
            return dev.model
    raise UnknownComponentError(f"no device named {name!r}")


def _pct_label(delta_pct: float) -> str:
    return f"{delta_pct:g}".replace("-", "m").replace(".", "p")


def run(scenario: Scenario, analysis_name: str) -> list[ResultTable]:
    """Execute one declared analysis; deterministic for a fixed scenario."""
    if analysis_name not in ANALYSES:
        raise ScenarioValidationError([f"unknown analysis {analysis_name!r}"])
    if analysis_name not in scenario.analyses:
        raise ScenarioValidationError(
            [f"analysis {analysis_name!r} is not declared in scenario {scenario.name!r}"])
    opts = scenario.analyses[analysis_name]
    omegas = scenario.omegas
    freqs = omegas / (2.0 * math.pi)
    meta = _meta(scenario, analysis_name)

    if analysis_name == "device-passivity":
        model = _device_model(scenario, opts["device"])
        sweep = passivity.index_sweep(model, omegas)
        rows = np.column_stack([freqs, sweep.indices, sweep.eigen_gaps])
        return [ResultTable(f"device_passivity_{opts['device']}",
                            ("freq_hz", "index", "eigen_gap"), rows, meta)]

    if analysis_name == "device-sens":
        model = _device_model(scenario, opts["device"])
        param = opts["param"]
        delta_pct = float(opts.get("delta_pct", 5.0))
        rho = model.get_param(param)
        delta = rho * delta_pct / 100.0 if rho != 0 else delta_pct / 100.0
        pred = passivity.first_order_prediction(model, param, omegas, delta)
        label = _pct_label(delta_pct)
        rows = np.column_stack([
            freqs, pred.base, (pred.predicted - pred.base) / pred.delta,
            pred.predicted, pred.actual,
        ])
        return [ResultTable(
            f"device_sens_{opts['device']}_{param}",
            ("freq_hz", "index", "d_index",
             f"predicted_after_{label}pct", f"exact_after_{label}pct"),
            rows, meta)]

    if analysis_name == "nodal-passivity":
        sweep = net.nodal_passivity_sweep(scenario.network, omegas)
        columns = ["freq_hz", "nodal_index"]
        series = [freqs, sweep.indices]
        for dev in scenario.network.devices:
            standalone = passivity.index_sweep(dev.model, omegas)
            columns.append(f"index_{dev.name}")
            series.append(standalone.indices)
        return [ResultTable("nodal_passivity", tuple(columns),
                            np.column_stack(series), meta)]

    if analysis_name == "nodal-sens":
        comp, param = opts["component"], opts["param"]
        sens = net.nodal_param_sensitivity(scenario.network, comp, param, omegas)
        rows = np.column_stack([freqs, sens.indices, sens.derivatives,
                                sens.degenerate.astype(float)])
        return [ResultTable(f"nodal_sens_{comp}_{param}",
                            ("freq_hz", "nodal_index", "d_index", "degenerate"),
                            rows, meta)]

    if analysis_name == "participation":
        table = net.participation_sweep(scenario.network, omegas)
        columns = ["freq_hz", "nodal_index"] + [f"p_{n}" for n in table.names] + ["degenerate"]
        rows = np.column_stack([freqs, table.indices, table.values.T,
                                table.degenerate.astype(float)])
        return [ResultTable("participation", tuple(columns), rows, meta)]

    if analysis_name == "gnc":
        loci, verdict = stability.gnc_auto(
            scenario.network,
            f_min_hz=float(freqs[0]),
            f_max_hz=float(freqs[-1]),
            points=len(omegas),
        )
        m = loci.loci.shape[0]
        columns = ["freq_hz"]
        series = [loci.omegas / (2.0 * math.pi)]
        for t in range(m):
            columns += [f"re_locus_{t + 1}", f"im_locus_{t + 1}"]
            series += [loci.loci[t].real, loci.loci[t].imag]
        loci_table = ResultTable("gnc_loci", tuple(columns),
                                 np.column_stack(series), meta)
        verdict_table = ResultTable(
            "gnc_verdict",
            ("encirclements", "stable", "winding_float",
             "min_critical_distance", "standalone_stable_asserted"),
            np.array([[verdict.encirclements, float(verdict.stable),
                       verdict.winding_float, verdict.min_critical_distance,
                       float(scenario.standalone_stable)]]),
            meta)
        return [loci_table, verdict_table]

    if analysis_name == "fdpf":
        f_hz = float(opts["f_hz"])
        part = stability.fd_pf(scenario.network, 1j * 2.0 * math.pi * f_hz)
        diag = part.diagonal_by_bus()
        rows = np.column_stack([
            np.full(diag.size, f_hz),
            np.arange(1.0, diag.size + 1.0),
            diag.real, diag.imag, np.abs(diag),
        ])
        table = ResultTable("fdpf",
                            ("freq_hz", "bus", "re_participation",
                             "im_participation", "abs_participation"),
                            rows, meta)
        lam = part.critical_value
        crit = ResultTable(
            "fdpf_critical",
            ("freq_hz", "re_lambda_c", "im_lambda_c", "n_tied"),
            np.array([[f_hz, lam.real, lam.imag, float(len(part.tied_with))]]),
            meta)
        return [table, crit]

    # modes
    re_min = float(opts.get("re_min", -500.0))
    re_max = float(opts.get("re_max", 200.0))
    f_max = float(opts.get("f_max_hz", 500.0))
    scan = stability.mode_scan(
        scenario.network, scenario.omega_b,
        re_range=(re_min, re_max),
        im_range=(0.0, 2.0 * math.pi * f_max),
    )
    modes = sorted(scan.modes, key=lambda m: (m.frequency_hz, m.lam.real))
    rows = np.array([
        [m.frequency_hz, m.lam.real, m.lam.imag, m.residual, float(m.iterations)]
        for m in modes
    ]).reshape(len(modes), 5)
    table = ResultTable("modes",
                        ("freq_hz", "re_lambda", "im_lambda", "residual", "iterations"),
                        rows, meta)
    verdict = ResultTable("modes_verdict", ("unstable", "n_modes"),
                          np.array([[float(scan.unstable), float(len(modes))]]),
                          meta)
    return [table, verdict]


# --- serialization ----------------------------------------------------------

def emit_csv(table: ResultTable, path) -> None:
    """Header plus rows at 17 significant digits; metadata stays in memory."""
    lines = [",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_result_csv(path) -> ResultTable:
    """Re-parse an emitted CSV (used by tests for roundtrip checks)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    columns = tuple(lines[0].split(","))
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if rows.size == 0:
        rows = rows.reshape(0, len(columns))
    return ResultTable(name=Path(path).stem, columns=columns, rows=rows, meta={})


# --- SVG emission -----------------------------------------------------------

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2",
)

_W, _H = 880, 520
_ML, _MR, _MT, _MB = 72, 24, 46, 54


@dataclass(frozen=True)
class PlotSpec:
    """How to render a table: log-frequency lines or a Nyquist plane."""

    kind: str = "line"  # "line" | "nyquist"
    title: str = ""
    x_label: str = "frequency (Hz)"
    y_label: str = ""


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _path_d(xs: np.ndarray, ys: np.ndarray) -> str:
    """SVG path data; non-finite samples split the path into segments."""
    parts = []
    pen_down = False
    for x, y in zip(xs, ys):
        if not (math.isfinite(x) and math.isfinite(y)):
            pen_down = False
            continue
        parts.append(f"{'L' if pen_down else 'M'}{x:.2f} {y:.2f}")
        pen_down = True
    return " ".join(parts)


def _svg_header(title: str) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{_W / 2:.0f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15" fill="#111">{_esc(title)}</text>')
    return out


def _axes_frame() -> str:
    x0, y0 = _ML, _H - _MB
    x1, y1 = _W - _MR, _MT
    return (f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            f'fill="none" stroke="#444" stroke-width="1"/>')


def _svg_line_plot(tables: list[ResultTable], spec: PlotSpec) -> str:
    series = []  # (label, x array, y array)
    for table in tables:
        x = table.rows[:, 0]
        for c in range(1, len(table.columns)):
            label = table.columns[c]
            if len(tables) > 1:
                label = f"{table.name}:{label}"
            series.append((label, x, table.rows[:, c]))
    if not series:
        raise ValueError("nothing to plot")

    all_x = np.concatenate([x for _, x, _ in series])
    all_x = all_x[np.isfinite(all_x) & (all_x > 0)]
    if all_x.size == 0:
        raise ValueError("log-frequency plot needs positive x values")
    lx0, lx1 = math.log10(all_x.min()), math.log10(all_x.max())
    if lx1 - lx0 < 1e-12:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5

    all_y = np.concatenate([y for _, _, y in series])
    all_y = all_y[np.isfinite(all_y)]
    y0v, y1v = (float(all_y.min()), float(all_y.max())) if all_y.size else (0.0, 1.0)
    if y1v - y0v < 1e-300:
        y0v, y1v = y0v - 1.0, y1v + 1.0
    pad = 0.05 * (y1v - y0v)
    y0v, y1v = y0v - pad, y1v + pad

    def sx(x):
        return _ML + (math.log10(x) - lx0) / (lx1 - lx0) * (_W - _ML - _MR)

    def sy(y):
        return (_H - _MB) - (y - y0v) / (y1v - y0v) * (_H - _MT - _MB)

    out = _svg_header(spec.title)
    # decade gridlines and x tick labels
    for k in range(math.ceil(lx0 - 1e-9), math.floor(lx1 + 1e-9) + 1):
        gx = sx(10.0 ** k)
        out.append(f'<line x1="{gx:.2f}" y1="{_MT}" x2="{gx:.2f}" y2="{_H - _MB}" '
                   f'stroke="#ddd" stroke-width="1"/>')
        out.append(f'<text x="{gx:.2f}" y="{_H - _MB + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11" fill="#333">{_fmt(10.0 ** k)}</text>')
    # y ticks
    for t in np.linspace(y0v, y1v, 6):
        gy = sy(t)
        out.append(f'<line x1="{_ML}" y1="{gy:.2f}" x2="{_W - _MR}" y2="{gy:.2f}" '
                   f'stroke="#eee" stroke-width="1"/>')
        out.append(f'<text x="{_ML - 6}" y="{gy + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11" fill="#333">{_fmt(t)}</text>')
    # zero line when visible
    if y0v < 0 < y1v:
        gy = sy(0.0)
        out.append(f'<line x1="{_ML}" y1="{gy:.2f}" x2="{_W - _MR}" y2="{gy:.2f}" '
                   f'stroke="#999" stroke-width="1" stroke-dasharray="4 3"/>')
    out.append(_axes_frame())

    for k, (label, x, y) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        keep = np.isfinite(x) & (x > 0)
        px = np.array([sx(v) if ok else math.nan for v, ok in zip(x, keep)])
        py = np.array([sy(v) if math.isfinite(v) else math.nan for v in y])
        d = _path_d(px, py)
        out.append(f'<path class="series" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" d="{d}"/>')
        ly = _MT + 16 + 14 * k
        out.append(f'<line x1="{_W - _MR - 150}" y1="{ly - 4}" x2="{_W - _MR - 130}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _MR - 124}" y="{ly}" font-family="sans-serif" '
                   f'font-size="11" fill="#333">{_esc(label)}</text>')

    out.append(f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 14}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12" fill="#111">{_esc(spec.x_label)}</text>')
    if spec.y_label:
        out.append(f'<text x="16" y="{(_MT + _H - _MB) / 2:.0f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12" fill="#111" '
                   f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.0f})">{_esc(spec.y_label)}</text>')
    out.append("</svg>")
    return "\n".join(out)


def _svg_nyquist_plot(tables: list[ResultTable], spec: PlotSpec) -> str:
    series = []  # (label, complex samples)
    for table in tables:
        cols = list(table.columns)
        for c in range(len(cols) - 1):
            if cols[c].startswith("re_") and cols[c + 1] == "im_" + cols[c][3:]:
                label = cols[c][3:]
                if len(tables) > 1:
                    label = f"{table.name}:{label}"
                series.append((label, table.rows[:, c] + 1j * table.rows[:, c + 1]))
    if not series:
        raise ValueError("nyquist plot needs re_*/im_* column pairs")

    pts = np.concatenate([z for _, z in series])
    pts = pts[np.isfinite(pts.real) & np.isfinite(pts.imag)]
    re = np.concatenate([pts.real, [-1.0, 1.0]])
    im = np.concatenate([pts.imag, [-1.0, 1.0]])
    cx, cy = (re.min() + re.max()) / 2.0, (im.min() + im.max()) / 2.0
    span = max(re.max() - re.min(), im.max() - im.min()) * 1.1 or 2.0

    side = min(_W - _ML - _MR, _H - _MT - _MB)
    ox = _ML + ((_W - _ML - _MR) - side) / 2.0
    oy = _MT + ((_H - _MT - _MB) - side) / 2.0

    def sx(x):
        return ox + (x - (cx - span / 2.0)) / span * side

    def sy(y):
        return oy + side - (y - (cy - span / 2.0)) / span * side

    out = _svg_header(spec.title)
    out.append(f'<rect x="{ox:.2f}" y="{oy:.2f}" width="{side:.2f}" height="{side:.2f}" '
               f'fill="none" stroke="#444" stroke-width="1"/>')
    for t in np.linspace(cx - span / 2.0, cx + span / 2.0, 6):
        gx = sx(t)
        out.append(f'<text x="{gx:.2f}" y="{oy + side + 16:.2f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10" fill="#333">{_fmt(t)}</text>')
    for t in np.linspace(cy - span / 2.0, cy + span / 2.0, 6):
        gy = sy(t)
        out.append(f'<text x="{ox - 6:.2f}" y="{gy + 3:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10" fill="#333">{_fmt(t)}</text>')
    # real/imaginary axes through zero when visible
    if cx - span / 2.0 < 0 < cx + span / 2.0:
        out.append(f'<line x1="{sx(0):.2f}" y1="{oy:.2f}" x2="{sx(0):.2f}" '
                   f'y2="{oy + side:.2f}" stroke="#bbb" stroke-width="1"/>')
    if cy - span / 2.0 < 0 < cy + span / 2.0:
        out.append(f'<line x1="{ox:.2f}" y1="{sy(0):.2f}" x2="{ox + side:.2f}" '
                   f'y2="{sy(0):.2f}" stroke="#bbb" stroke-width="1"/>')

    for k, (label, z) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        px = np.array([sx(v.real) if math.isfinite(v.real) else math.nan for v in z])
        py = np.array([sy(v.imag) if math.isfinite(v.imag) else math.nan for v in z])
        out.append(f'<path class="series" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" d="{_path_d(px, py)}"/>')
        ly = oy + 16 + 14 * k
        out.append(f'<text x="{ox + side - 8:.2f}" y="{ly:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11" fill="{color}">{_esc(label)}</text>')

    # the critical point (-1, 0)
    mx, my = sx(-1.0), sy(0.0)
    out.append(f'<line x1="{mx - 6:.2f}" y1="{my:.2f}" x2="{mx + 6:.2f}" y2="{my:.2f}" '
               f'stroke="#c00" stroke-width="1.6"/>')
    out.append(f'<line x1="{mx:.2f}" y1="{my - 6:.2f}" x2="{mx:.2f}" y2="{my + 6:.2f}" '
               f'stroke="#c00" stroke-width="1.6"/>')
    out.append(f'<circle cx="{mx:.2f}" cy="{my:.2f}" r="4" fill="none" '
               f'stroke="#c00" stroke-width="1.2"/>')
    out.append(f'<text x="{mx + 8:.2f}" y="{my - 8:.2f}" font-family="sans-serif" '
               f'font-size="11" fill="#c00">(-1, 0)</text>')
    out.append("</svg>")
    return "\n".join(out)


def emit_svg_plot(tables, spec: PlotSpec, path) -> None:
    """Render one or more tables to a standalone SVG 1.1 file."""
    if isinstance(tables, ResultTable):
        tables = [tables]
    if spec.kind == "nyquist":
        text = _svg_nyquist_plot(list(tables), spec)
    else:
        text = _svg_line_plot(list(tables), spec)
    Path(path).write_text(text + "\n", encoding="utf-8")


# --- fixtures and CLI -------------------------------------------------------

def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled scenario fixture."""
    return Path(str(resources.files("fdpassivity") / "fixtures" / name))


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _plot_spec_for(table: ResultTable, scenario: Scenario) -> PlotSpec | None:
    if table.name == "gnc_loci":
        return PlotSpec(kind="nyquist", title=f"{scenario.name}: loop-gain eigenloci")
    if table.columns and table.columns[0] == "freq_hz" and len(table.columns) > 1 \
            and table.rows.shape[0] > 1:
        return PlotSpec(kind="line", title=f"{scenario.name}: {table.name}")
    return None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fdpassivity",
        description="Frequency-domain passivity and stability analysis "
                    "for converter-dominated power systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="ANALYSIS")
    for cmd in ANALYSES:
        p = sub.add_parser(cmd, help=f"run the {cmd} analysis declared in the scenario")
        p.add_argument("--scenario", required=True, help="path to a scenario JSON file")
        p.add_argument("--out", required=True, help="directory for result files")
        p.add_argument("--svg", action="store_true", help="also emit SVG plots")
    args = parser.parse_args(argv)

    try:
        scenario = load_scenario(args.scenario)
        tables = run(scenario, args.command)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for table in tables:
            csv_path = out_dir / f"{_safe_name(table.name)}.csv"
            emit_csv(table, csv_path)
            print(f"wrote {csv_path}")
            if args.svg:
                spec = _plot_spec_for(table, scenario)
                if spec is not None:
                    svg_path = out_dir / f"{_safe_name(table.name)}.svg"
                    emit_svg_plot(table, spec, svg_path)
                    print(f"wrote {svg_path}")
        _print_summary(args.command, tables)
    except ScenarioValidationError as exc:
        print("scenario validation failed:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


def _print_summary(command: str, tables: list[ResultTable]) -> None:
    by_name = {t.name: t for t in tables}
    if command == "gnc" and "gnc_verdict" in by_name:
        row = by_name["gnc_verdict"].rows[0]
        verdict = "stable" if row[1] else "unstable"
        print(f"gnc verdict: {verdict} (encirclements={int(row[0])}, "
              f"min distance to critical point={row[3]:.4g})")
    elif command == "modes" and "modes_verdict" in by_name:
        row = by_name["modes_verdict"].rows[0]
        verdict = "unstable" if row[0] else "stable"
        print(f"mode scan: {verdict} ({int(row[1])} distinct modes found)")


if __name__ == "__main__":
    sys.exit(main())
