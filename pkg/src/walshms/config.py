"""JSON run configuration.

Frequencies in the document are cycles per second (Hz) and are converted to
angular units here, nowhere else: ``omega = 2 pi * omega_hz``. Times are
seconds.

Grid units for the ``delta`` and ``delta_error`` axes:

``hz``
    plain frequency, value * 2 pi rad/s
``normalized``
    x = delta t_g / 2 pi, where t_g is the series' own gate time
``offset``
    (delta t_g / 2 pi) minus the closure value 2^bit_length(k), so every
    Walsh order is centred on its own closure point
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gate_model as gm
from .errors import ConfigError, DomainError
from .gate_model import GateParams
from .oracle import OracleConfig
from .scan import AXES, ENGINES, OBSERVABLES, ScanSpec

GATE_DEFAULTS = {
    "omega_hz": 1470.0,
    "delta_hz": 0.0,
    "delta_error_hz": 0.0,
    "gate_time": 1e-4,
    "nbar": 0.0,
    "walsh_index": 0,
    "ion_count": 1,
    "phi_s": 0.0,
    "phi_m": 0.0,
    "plan_order": None,
}
SCAN_DEFAULTS = {
    "axis": "delta",
    "units": "hz",
    "values": None,
    "start": None,
    "stop": None,
    "num": None,
    "spacing": "linear",
    "engine": "analytic",
    "observable": "spin_revival",
    "include_error_in_phase": False,
}
ORACLE_DEFAULTS = {
    "n_max": None,
    "dt_init": None,
    "tol": 1e-9,
    "thermal_weight_cutoff": 1e-6,
    "max_refinements": 10,
}
TRAJECTORY_DEFAULTS = {"n_samples": 401}
SERIES_KEYS = set(GATE_DEFAULTS) | {"label"}
TOP_KEYS = {"gate", "scan", "series", "oracle", "trajectory"}
UNITS = ("hz", "normalized", "offset")


@dataclass(frozen=True)
class RunConfig:
    gate: dict
    scan: dict
    oracle: dict
    trajectory: dict
    series: tuple

    def canonical(self) -> dict:
        return {
            "gate": dict(self.gate),
            "oracle": dict(self.oracle),
            "scan": dict(self.scan),
            "series": [dict(s) for s in self.series],
            "trajectory": dict(self.trajectory),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), indent=2, sort_keys=True) + "\n"

    # ------------------------------------------------------------ builders

    def oracle_config(self) -> OracleConfig:
        try:
            return OracleConfig(**self.oracle)
        except DomainError as exc:
            raise ConfigError(f"oracle: {exc}") from None

    def gate_params(self, overrides: dict | None = None) -> GateParams:
        g = dict(self.gate)
        g.update({k: v for k, v in (overrides or {}).items() if k != "label"})
        try:
            omega = 2 * math.pi * g["omega_hz"]
            if g["plan_order"] is not None:
                n = g["plan_order"]
                gate_time, delta = gm.plan_gate(n, omega)
                return GateParams(
                    omega=omega, delta=delta, gate_time=gate_time,
                    delta_error=2 * math.pi * g["delta_error_hz"], nbar=g["nbar"],
                    walsh_index=2**n - 1, ion_count=g["ion_count"],
                    phi_s=g["phi_s"], phi_m=g["phi_m"],
                )
            return GateParams(
                omega=omega, delta=2 * math.pi * g["delta_hz"], gate_time=g["gate_time"],
                delta_error=2 * math.pi * g["delta_error_hz"], nbar=g["nbar"],
                walsh_index=g["walsh_index"], ion_count=g["ion_count"],
                phi_s=g["phi_s"], phi_m=g["phi_m"],
            )
        except DomainError as exc:
            raise ConfigError(f"gate: {exc}") from None

    def grid_values(self) -> np.ndarray:
        s = self.scan
        if s["values"] is not None:
            return np.asarray(s["values"], dtype=float)
        if s["start"] is None or s["stop"] is None or s["num"] is None:
            raise ConfigError("scan: give either 'values' or 'start', 'stop' and 'num'")
        if s["spacing"] == "log":
            if s["start"] <= 0 or s["stop"] <= 0:
                raise ConfigError("scan: log spacing needs positive start and stop")
            return np.logspace(math.log10(s["start"]), math.log10(s["stop"]), s["num"])
        return np.linspace(s["start"], s["stop"], s["num"])

    def to_internal(self, values: np.ndarray, params: GateParams) -> np.ndarray:
        """Convert user grid values into the internal units of the scan axis."""
        axis, units = self.scan["axis"], self.scan["units"]
        if axis in ("delta", "delta_error"):
            tg = params.gate_time
            if units == "hz":
                return 2 * math.pi * values
            if units == "normalized":
                return 2 * math.pi * values / tg
            closure = 2.0 ** params.walsh_index.bit_length() if axis == "delta" else 0.0
            return 2 * math.pi * (values + closure) / tg
        if units != "hz":
            raise ConfigError(f"scan: units {units!r} only apply to detuning axes")
        return values

    def scan_specs(self, engine: str | None = None) -> list[ScanSpec]:
        values = self.grid_values()
        series = self.series or ({},)
        out = []
        for entry in series:
            params = self.gate_params(entry)
            grid = self.to_internal(values, params)
            try:
                out.append(ScanSpec(
                    base=params, axis=self.scan["axis"], grid=tuple(grid),
                    engine=engine or self.scan["engine"], observable=self.scan["observable"],
                    oracle_config=self.oracle_config(),
                    include_error_in_phase=self.scan["include_error_in_phase"],
                    label=entry.get("label", ""),
                ))
            except DomainError as exc:
                raise ConfigError(f"scan: {exc}") from None
        return out


def _merge(section: str, given, defaults: dict, allowed=None) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: expected an object")
    allowed = set(defaults) if allowed is None else allowed
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _validate(cfg: RunConfig) -> None:
    g, s, o, t = cfg.gate, cfg.scan, cfg.oracle, cfg.trajectory
    for key in ("omega_hz", "delta_hz", "delta_error_hz", "gate_time", "nbar", "phi_s", "phi_m"):
        _require(_is_num(g[key]), f"gate.{key}: expected a number")
    for key in ("walsh_index", "ion_count"):
        _require(isinstance(g[key], int) and not isinstance(g[key], bool), f"gate.{key}: expected an integer")
    _require(g["plan_order"] is None or (isinstance(g["plan_order"], int) and g["plan_order"] >= 0),
             "gate.plan_order: expected a non-negative integer or null")
    _require(s["axis"] in AXES, f"scan.axis: expected one of {AXES}")
    _require(s["units"] in UNITS, f"scan.units: expected one of {UNITS}")
    _require(s["engine"] in ENGINES, f"scan.engine: expected one of {ENGINES}")
    _require(s["observable"] in OBSERVABLES, f"scan.observable: expected one of {OBSERVABLES}")
    _require(s["spacing"] in ("linear", "log"), "scan.spacing: expected 'linear' or 'log'")
    _require(isinstance(s["include_error_in_phase"], bool), "scan.include_error_in_phase: expected a boolean")
    if s["values"] is not None:
        _require(isinstance(s["values"], list) and s["values"] and all(_is_num(v) for v in s["values"]),
                 "scan.values: expected a non-empty list of numbers")
    if s["num"] is not None:
        _require(isinstance(s["num"], int) and s["num"] >= 1, "scan.num: expected a positive integer")
    _require(isinstance(t["n_samples"], int) and t["n_samples"] >= 2, "trajectory.n_samples: expected an integer >= 2")
    _require(o["n_max"] is None or isinstance(o["n_max"], int), "oracle.n_max: expected an integer or null")
    _require(_is_num(o["tol"]) and o["tol"] > 0, "oracle.tol: expected a positive number")


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected an object")
    unknown = sorted(set(doc) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"top level: unknown key(s) {', '.join(unknown)}")
    series = doc.get("series") or []
    if not isinstance(series, list):
        raise ConfigError("series: expected a list")
    merged_series = []
    for i, entry in enumerate(series):
        if not isinstance(entry, dict):
            raise ConfigError(f"series[{i}]: expected an object")
        bad = sorted(set(entry) - SERIES_KEYS)
        if bad:
            raise ConfigError(f"series[{i}]: unknown key(s) {', '.join(bad)}")
        merged_series.append(dict(sorted(entry.items())))
    cfg = RunConfig(
        gate=_merge("gate", doc.get("gate"), GATE_DEFAULTS),
        scan=_merge("scan", doc.get("scan"), SCAN_DEFAULTS),
        oracle=_merge("oracle", doc.get("oracle"), ORACLE_DEFAULTS),
        trajectory=_merge("trajectory", doc.get("trajectory"), TRAJECTORY_DEFAULTS),
        series=tuple(merged_series),
    )
    _validate(cfg)
    for i, entry in enumerate(cfg.series):
        probe = {**cfg.gate, **{k: v for k, v in entry.items() if k != "label"}}
        _validate(RunConfig(probe, cfg.scan, cfg.oracle, cfg.trajectory, ()))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(doc)
