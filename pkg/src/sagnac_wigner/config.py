"""Experiment configuration: one JSON document, strictly validated."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .field import FieldSpec, Grid, make_grid
from .sagnac import DetectorModel, InterferometerConfig, linear_uniformity
from .scan import ScanConfig

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "preset_path", "PRESETS"]

PRESETS = ("tophat", "double_slit", "double_slit_incoherent", "gaussian")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, line: int | None = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{key}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    field: FieldSpec
    grid: Grid
    interferometer: InterferometerConfig
    detector: DetectorModel
    scan: ScanConfig
    background_method: str = "calibration"
    out_dir: str = "out"
    write_csv: bool = True
    write_json: bool = True
    source: dict | None = None


_SCHEMA = {
    "field": {"kind", "width_m", "spacing_m", "slit_width_m", "waist_m", "order", "coherence"},
    "grid": {"n", "extent_m", "center_m"},
    "interferometer": {"wavelength_m", "na_limit"},
    "detector": {"eta", "photon_flux_hz", "far_field_rate_hz", "dark_rate_hz", "uniformity"},
    "scan": {"x", "theta", "dwell_s", "seed", "noiseless"},
    "reconstruct": {"background"},
    "outputs": {"directory", "csv", "json"},
}
_REQUIRED = ("field", "grid", "interferometer", "detector", "scan")


class _Doc:
    """Key lookups that report failures against the JSON source line."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line_of(self, key: str) -> int | None:
        leaf = key.split(".")[-1]
        pat = re.compile(r'"%s"\s*:' % re.escape(leaf))
        for i, line in enumerate(self.lines, 1):
            if pat.search(line):
                return i
        return None

    def fail(self, key: str, message: str):
        raise ConfigError(key, message, self.line_of(key))


def _get(doc: _Doc, section: dict, path: str, name: str, kind=float, default=Any, check=None):
    key = f"{path}.{name}"
    if name not in section:
        if default is Any:
            doc.fail(key, "missing required key")
        return default
    value = section[name]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            doc.fail(key, f"expected a number, got {value!r}")
        value = float(value)
        if not np.isfinite(value):
            doc.fail(key, "must be finite")
    elif kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            doc.fail(key, f"expected an integer, got {value!r}")
    elif kind is bool:
        if not isinstance(value, bool):
            doc.fail(key, f"expected true/false, got {value!r}")
    elif kind is str:
        if not isinstance(value, str):
            doc.fail(key, f"expected a string, got {value!r}")
    if check is not None:
        msg = check(value)
        if msg:
            doc.fail(key, msg)
    return value


def _positive(v):
    return None if v > 0 else f"must be positive, got {v!r}"


def _nonneg(v):
    return None if v >= 0 else f"must be non-negative, got {v!r}"


def _section(doc: _Doc, raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        doc.fail(name, "expected an object")
    unknown = set(sec) - _SCHEMA[name]
    if unknown:
        bad = sorted(unknown)[0]
        doc.fail(f"{name}.{bad}", "unknown key")
    return sec


def _axis(doc: _Doc, sec: dict, path: str, unit: str) -> Grid:
    if not isinstance(sec, dict):
        doc.fail(path, "expected an object")
    allowed = {"n", f"extent_{unit}", f"center_{unit}"}
    unknown = set(sec) - allowed
    if unknown:
        doc.fail(f"{path}.{sorted(unknown)[0]}", "unknown key")
    n = _get(doc, sec, path, "n", int, check=lambda v: None if v >= 2 else "must be >= 2")
    extent = _get(doc, sec, path, f"extent_{unit}", check=_positive)
    center = _get(doc, sec, path, f"center_{unit}", default=0.0)
    return make_grid(n, extent, center)


def parse_config(raw: dict, text: str | None = None) -> ExperimentConfig:
    doc = _Doc(text if text is not None else json.dumps(raw, indent=1))
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        doc.fail(sorted(unknown)[0], "unknown key")
    for name in _REQUIRED:
        if name not in raw:
            doc.fail(name, "missing required section")

    f = _section(doc, raw, "field")
    kind = _get(doc, f, "field", "kind", str)
    try:
        spec = FieldSpec(
            kind=kind,
            width=_get(doc, f, "field", "width_m", default=None),
            spacing=_get(doc, f, "field", "spacing_m", default=None),
            slit_width=_get(doc, f, "field", "slit_width_m", default=None),
            waist=_get(doc, f, "field", "waist_m", default=None),
            order=_get(doc, f, "field", "order", int, default=0),
            coherence=_get(doc, f, "field", "coherence", str, default="coherent"),
        )
    except ValueError as exc:
        doc.fail("field.kind", str(exc))

    g = _section(doc, raw, "grid")
    n = _get(doc, g, "grid", "n", int, check=lambda v: None if v >= 2 else "must be >= 2")
    grid = make_grid(n, _get(doc, g, "grid", "extent_m", check=_positive),
                     _get(doc, g, "grid", "center_m", default=0.0))

    i = _section(doc, raw, "interferometer")
    interf = InterferometerConfig(
        wavelength=_get(doc, i, "interferometer", "wavelength_m", check=_positive),
        na_limit=_get(doc, i, "interferometer", "na_limit", default=0.09,
                      check=lambda v: None if 0 < v <= 1 else "must be in (0, 1]"),
    )

    d = _section(doc, raw, "detector")
    eta = _get(doc, d, "detector", "eta", check=lambda v: None if 0 < v <= 1 else "must be in (0, 1]")
    if ("photon_flux_hz" in d) == ("far_field_rate_hz" in d):
        doc.fail("detector.photon_flux_hz", "give exactly one of photon_flux_hz or far_field_rate_hz")
    if "photon_flux_hz" in d:
        flux = _get(doc, d, "detector", "photon_flux_hz", check=_nonneg)
    else:
        flux = 2 * _get(doc, d, "detector", "far_field_rate_hz", check=_nonneg) / eta
    uni = d.get("uniformity", "constant")
    if uni == "constant":
        profile = None
    elif isinstance(uni, dict) and uni.get("kind") == "linear" and set(uni) <= {"kind", "min"}:
        lo = uni.get("min", 0.85)
        if not (isinstance(lo, (int, float)) and 0 < lo <= 1):
            doc.fail("detector.uniformity", "linear minimum must be in (0, 1]")
        profile = lambda grid, lo=float(lo): linear_uniformity(grid, lo)  # noqa: E731
    else:
        doc.fail("detector.uniformity", 'expected "constant" or {"kind": "linear", "min": ...}')
    det = DetectorModel(eta=eta, photon_flux=flux,
                        dark_rate=_get(doc, d, "detector", "dark_rate_hz", default=0.0, check=_nonneg),
                        uniformity=profile)

    s = _section(doc, raw, "scan")
    if "x" not in s:
        doc.fail("scan.x", "missing required key")
    if "theta" not in s:
        doc.fail("scan.theta", "missing required key")
    seed = _get(doc, s, "scan", "seed", int, default=0,
                check=lambda v: None if 0 <= v < 2**64 else "must be an unsigned 64-bit integer")
    scan = ScanConfig(
        x_points=_axis(doc, s["x"], "scan.x", "m"),
        theta_points=_axis(doc, s["theta"], "scan.theta", "rad"),
        dwell=_get(doc, s, "scan", "dwell_s", default=0.1, check=_positive),
        seed=seed,
        noiseless=_get(doc, s, "scan", "noiseless", bool, default=False),
    )
    worst = float(np.max(np.abs(np.sin(scan.theta_points.positions))))
    if worst > interf.na_limit:
        doc.fail("scan.theta", f"tilts reach sin(theta)={worst:.4g}, beyond na_limit {interf.na_limit}")
    x_lo, x_hi = scan.x_points.positions[[0, -1]]
    g_lo, g_hi = grid.positions[[0, -1]]
    if x_lo < g_lo or x_hi > g_hi:
        doc.fail("scan.x", "translation raster extends beyond the field grid")

    r = _section(doc, raw, "reconstruct")
    method = _get(doc, r, "reconstruct", "background", str, default="calibration",
                  check=lambda v: None if v in ("calibration", "plateau") else "must be calibration or plateau")
    o = _section(doc, raw, "outputs")
    return ExperimentConfig(
        field=spec, grid=grid, interferometer=interf, detector=det, scan=scan,
        background_method=method,
        out_dir=_get(doc, o, "outputs", "directory", str, default="out"),
        write_csv=_get(doc, o, "outputs", "csv", bool, default=True),
        write_json=_get(doc, o, "outputs", "json", bool, default=True),
        source=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc.msg}", exc.lineno) from exc
    return parse_config(raw, text)


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}")
    return Path(str(resources.files("sagnac_wigner") / "presets" / f"{name}.json"))
