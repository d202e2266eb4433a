"""Command-line front end.

    sagnac-wigner simulate    --config CFG --out DIR [--seed N] [--noiseless]
    sagnac-wigner reconstruct COUNTS.csv --config CFG --out DIR
    sagnac-wigner analytic    --config CFG --out DIR
    sagnac-wigner compare     A.csv B.csv [--threshold 0.99]

Exit codes: 0 ok, 1 runtime/data error, 2 invalid config, 3 compare below threshold.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .field import make_state
from .reconstruct import (
    FeatureError,
    compare_maps,
    estimate_background,
    extract_features,
    read_wigner_csv,
    reconstruct_wigner,
    report_json,
    write_wigner_csv,
)
from .scan import counts_json, read_counts_csv, run_scan, write_counts_csv
from .wigner import analytic_map

log = logging.getLogger("sagnac_wigner")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_BELOW = 0, 1, 2, 3


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_dir(args, cfg: ExperimentConfig | None) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(cfg.out_dir if cfg is not None else ".")


def _analytic_on_raster(cfg: ExperimentConfig, x: np.ndarray):
    k = cfg.interferometer.k0 * np.sin(cfg.scan.theta_points.positions)
    return analytic_map(cfg.field, x, k, center=cfg.grid.center)


def _snapped_x(cfg: ExperimentConfig) -> np.ndarray:
    g = cfg.grid
    return np.array([g.positions[g.nearest_index(v, tol=np.inf)] for v in cfg.scan.x_points.positions])


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scan = cfg.scan
    if args.seed is not None:
        scan = replace(scan, seed=args.seed)
    if args.noiseless:
        scan = replace(scan, noiseless=True)
    state = make_state(cfg.field, cfg.grid)
    cmap = run_scan(state, scan, cfg.detector, cfg.interferometer)
    out = _out_dir(args, cfg)
    if cfg.write_csv:
        _atomic_write(out / "counts.csv", lambda fh: write_counts_csv(cmap, fh))
    if cfg.write_json:
        extra = {"config": cfg.source}
        _atomic_write(out / "counts.json", lambda fh: fh.write(counts_json(cmap, extra) + "\n"))
    log.info("wrote %dx%d raster to %s", *cmap.counts.shape, out)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    with open(args.counts, newline="") as fh:
        cmap = read_counts_csv(fh, cfg.scan)
    expected_x = _snapped_x(cfg)
    expected_t = cfg.scan.theta_points.positions
    if not (np.allclose(cmap.x, expected_x, rtol=1e-9, atol=1e-15)
            and np.allclose(cmap.theta, expected_t, rtol=1e-9, atol=1e-15)):
        raise ValueError("counts file axes do not match the configured scan raster")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        background = estimate_background(cmap, cfg.background_method, cfg.detector)
    report = reconstruct_wigner(cmap, background, cfg.interferometer,
                                notes=[str(w.message) for w in caught])
    kind = cfg.field.kind
    try:
        report.features = extract_features(report.wigner, kind, cfg.interferometer.wavelength)
    except FeatureError as exc:
        report.warnings.append(f"feature extraction: {exc}")
    if kind != "hermite_gauss":
        reference = _analytic_on_raster(cfg, cmap.x)
        report.comparison = compare_maps(report.wigner, reference.normalized())
    out = _out_dir(args, cfg)
    _atomic_write(out / "wigner.csv", lambda fh: write_wigner_csv(report.wigner, fh))
    _atomic_write(out / "report.json", lambda fh: fh.write(report_json(report) + "\n"))
    for note in report.warnings:
        log.warning(note)
    return EXIT_OK


def cmd_analytic(args) -> int:
    cfg = load_config(args.config)
    if cfg.field.kind == "hermite_gauss":
        raise ConfigError("field.kind", "no closed-form Wigner function for hermite_gauss")
    wmap = _analytic_on_raster(cfg, _snapped_x(cfg))
    out = _out_dir(args, cfg)
    _atomic_write(out / "wigner_analytic.csv", lambda fh: write_wigner_csv(wmap, fh))
    return EXIT_OK


def cmd_compare(args) -> int:
    with open(args.map_a) as fa, open(args.map_b) as fb:
        a, b = read_wigner_csv(fa), read_wigner_csv(fb)
    metrics = compare_maps(a, b)
    for key in ("l2_relative", "pearson", "peak_shift"):
        print(f"{key} {metrics[key]!r}")
    return EXIT_OK if metrics["pearson"] > args.threshold else EXIT_BELOW


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sagnac-wigner", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a photon-counting scan")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--noiseless", action="store_true")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reconstruct", help="turn counts into a normalized Wigner map")
    r.add_argument("counts")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)

    a = sub.add_parser("analytic", help="closed-form Wigner map on the scan raster")
    a.add_argument("--config", required=True)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analytic)

    c = sub.add_parser("compare", help="compare two Wigner CSV maps")
    c.add_argument("map_a")
    c.add_argument("map_b")
    c.add_argument("--threshold", type=float, default=0.99)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
