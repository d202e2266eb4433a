"""Simulate, reconstruct and summarize every bundled preset.

    python3 scripts/reproduce_maps.py --out runs/ [--noiseless]

Each preset gets its own directory holding counts, the reconstructed map,
the analytic map on the same raster and a report. A one-line summary per
preset goes to stdout.
"""

import argparse
import json
from pathlib import Path

from sagnac_wigner.cli import main as cli
from sagnac_wigner.config import preset_path

PRESETS = ("tophat", "gaussian", "double_slit", "double_slit_incoherent")


def run(name: str, out: Path, noiseless: bool) -> dict:
    cfg = str(preset_path(name))
    d = out / name
    args = ["simulate", "--config", cfg, "--out", str(d)]
    if noiseless:
        args.append("--noiseless")
    for argv in (args,
                 ["reconstruct", str(d / "counts.csv"), "--config", cfg, "--out", str(d)],
                 ["analytic", "--config", cfg, "--out", str(d)]):
        rc = cli(argv)
        if rc:
            raise SystemExit(f"{name}: '{argv[0]}' exited with {rc}")
    return json.loads((d / "report.json").read_text())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--noiseless", action="store_true")
    ap.add_argument("--presets", nargs="*", default=list(PRESETS))
    args = ap.parse_args()
    out = Path(args.out)
    for name in args.presets:
        report = run(name, out, args.noiseless)
        feats = {k: v for k, v in (report.get("features") or {}).items()
                 if isinstance(v, (int, float))}
        cmp_ = report.get("comparison") or {}
        shown = " ".join(f"{k}={v:.4g}" for k, v in feats.items())
        print(f"{name:24s} pearson={cmp_.get('pearson', float('nan')):.4f} {shown}")


if __name__ == "__main__":
    main()
