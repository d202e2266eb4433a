"""Steering-mirror raster and photon-count acquisition."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .field import EnsembleState, Grid
from .sagnac import DetectorModel, InterferometerConfig, MirrorSetting, interfere

__all__ = [
    "ScanConfig",
    "CountMap",
    "expected_count_map",
    "sample_counts",
    "run_scan",
    "pixel_generator",
    "thread_count",
    "write_counts_csv",
    "read_counts_csv",
    "counts_json",
]

THREADS_ENV = "SAGNAC_WIGNER_THREADS"
# rates this far below zero (relative to eta * flux) are round-off
PHYSICALITY_TOL = 1e-9
CSV_COLUMNS = ("ix", "itheta", "x_m", "theta_rad", "counts", "mean_rate_hz")

# counter word used to separate independent streams for the same pixel
STREAM_SIGNAL = 0
STREAM_ARM1 = 1
STREAM_ARM2 = 2


@dataclass(frozen=True)
class ScanConfig:
    x_points: Grid
    theta_points: Grid
    dwell: float = 0.1
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if not self.dwell > 0:
            raise ValueError(f"dwell must be positive, got {self.dwell}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x_points.n, self.theta_points.n)

    def check_aperture(self, cfg: InterferometerConfig):
        worst = np.max(np.abs(np.sin(self.theta_points.positions)))
        if worst > cfg.na_limit:
            raise ValueError(
                f"scan tilts reach sin(theta)={worst:.4g}, beyond NA {cfg.na_limit}"
            )

    def echo(self) -> dict:
        return {
            "x_points": asdict(self.x_points),
            "theta_points": asdict(self.theta_points),
            "dwell": self.dwell,
            "seed": int(self.seed),
            "noiseless": bool(self.noiseless),
        }


@dataclass(frozen=True)
class CountMap:
    """Counts and mean rates on the ``(x, theta)`` raster.

    ``x`` holds the translations actually applied, i.e. the requested raster
    snapped to whole field-grid samples. ``mean_rates`` includes dark counts.
    """

    scan: ScanConfig
    x: np.ndarray
    theta: np.ndarray
    counts: np.ndarray
    mean_rates: np.ndarray
    noiseless: bool = True
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        shape = (len(self.x), len(self.theta))
        for name in ("counts", "mean_rates"):
            a = np.asarray(getattr(self, name))
            if a.shape != shape:
                raise ValueError(f"{name} has shape {a.shape}, raster is {shape}")
        if np.any(np.asarray(self.counts) < 0):
            raise ValueError("counts must be non-negative")

    @property
    def dwell(self) -> float:
        return self.scan.dwell


def thread_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


def expected_count_map(
    state: EnsembleState,
    scan: ScanConfig,
    det: DetectorModel,
    cfg: InterferometerConfig,
    threads: int | None = None,
) -> CountMap:
    scan.check_aperture(cfg)
    grid = state.grid
    xs = np.array([grid.positions[grid.nearest_index(x, tol=np.inf)] for x in scan.x_points.positions])
    thetas = scan.theta_points.positions
    n1 = np.empty(scan.shape)
    n2 = np.empty(scan.shape)
    n12 = np.empty(scan.shape)

    def row(i):
        for j, th in enumerate(thetas):
            r = interfere(state, MirrorSetting(xs[i], th), det, cfg)
            n1[i, j], n2[i, j], n12[i, j] = r.n1, r.n2, r.n12

    workers = thread_count(threads)
    if workers == 1:
        for i in range(len(xs)):
            row(i)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(row, range(len(xs))))

    mean = n1 + n2 + n12 + det.dark_rate
    # full destructive interference leaves round-off of either sign
    tol = PHYSICALITY_TOL * det.eta * det.photon_flux
    if np.any(mean < -tol):
        raise ValueError(f"forward model produced a negative rate {mean.min():.4g} 1/s")
    mean = np.maximum(mean, 0.0)
    return CountMap(
        scan=scan,
        x=xs,
        theta=thetas,
        counts=mean * scan.dwell,
        mean_rates=mean,
        noiseless=True,
        extras={"n1": n1, "n2": n2, "n12": n12},
    )


def pixel_generator(seed: int, i: int, j: int, stream: int = STREAM_SIGNAL) -> np.random.Generator:
    """Counter-based generator for one pixel: Philox keyed by ``seed``.

    The counter's upper words hold ``(stream, i, j)`` and draws advance the
    lowest word, so pixels never share random numbers.
    """
    bits = np.random.Philox(key=int(seed), counter=[0, int(stream), int(i), int(j)])
    return np.random.Generator(bits)


def _poisson_grid(mean: np.ndarray, seed: int, stream: int, threads: int | None) -> np.ndarray:
    out = np.empty(mean.shape, dtype=np.int64)

    def row(i):
        for j in range(mean.shape[1]):
            out[i, j] = pixel_generator(seed, i, j, stream).poisson(mean[i, j])

    workers = thread_count(threads)
    if workers == 1:
        for i in range(mean.shape[0]):
            row(i)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(row, range(mean.shape[0])))
    return out


def sample_counts(expected: CountMap, seed: int | None = None, threads: int | None = None) -> CountMap:
    """Poisson counts around the noiseless expectation."""
    if not expected.noiseless:
        raise ValueError("sample_counts expects a noiseless CountMap")
    mean = np.asarray(expected.mean_rates) * expected.dwell
    if np.any(mean < 0):
        raise ValueError(
            f"negative expected count {mean.min():.3g}; the forward model produced an unphysical rate"
        )
    seed = expected.scan.seed if seed is None else seed
    counts = _poisson_grid(mean, seed, STREAM_SIGNAL, threads)
    return replace(expected, scan=replace(expected.scan, seed=seed, noiseless=False),
                   counts=counts, noiseless=False)


def run_scan(
    state: EnsembleState,
    scan: ScanConfig,
    det: DetectorModel,
    cfg: InterferometerConfig,
    threads: int | None = None,
) -> CountMap:
    expected = expected_count_map(state, scan, det, cfg, threads)
    if scan.noiseless:
        return expected
    return sample_counts(expected, scan.seed, threads)


def blocked_arm_counts(
    shape: tuple[int, int], det: DetectorModel, dwell: float, seed: int, arm: int,
    noiseless: bool, threads: int | None = None,
) -> np.ndarray:
    """Counts with one interferometer arm blocked (the other arm's constant term)."""
    mean = np.full(shape, (det.eta * det.photon_flux / 4 + det.dark_rate) * dwell)
    if noiseless:
        return mean
    stream = STREAM_ARM1 if arm == 1 else STREAM_ARM2
    return _poisson_grid(mean, seed, stream, threads).astype(float)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_counts_csv(cmap: CountMap, fh) -> None:
    """Row order is x-major; floats use shortest round-trip repr."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    counts = np.asarray(cmap.counts)
    integral = np.issubdtype(counts.dtype, np.integer)
    for i, x in enumerate(cmap.x):
        for j, th in enumerate(cmap.theta):
            c = int(counts[i, j]) if integral else float(counts[i, j])
            w.writerow([i, j, _fmt(x), _fmt(th), _fmt(c), _fmt(cmap.mean_rates[i, j])])


def read_counts_csv(fh, scan: ScanConfig) -> CountMap:
    """Parse a counts CSV written by :func:`write_counts_csv`.

    Raises ``ValueError`` when the row count or indices disagree with ``scan``.
    """
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ValueError(f"bad counts header {header!r}; expected {','.join(CSV_COLUMNS)}")
    rows = [r for r in reader if r]
    nx, nt = scan.shape
    if len(rows) != nx * nt:
        raise ValueError(f"counts file has {len(rows)} data rows; the scan raster needs {nx * nt} ({nx}x{nt})")
    x = np.empty(nx)
    theta = np.empty(nt)
    mean = np.empty((nx, nt))
    raw = []
    for r in rows:
        if len(r) != len(CSV_COLUMNS):
            raise ValueError(f"malformed counts row {r!r}")
        i, j = int(r[0]), int(r[1])
        if not (0 <= i < nx and 0 <= j < nt):
            raise ValueError(f"row index ({i}, {j}) outside the {nx}x{nt} raster")
        x[i] = float(r[2])
        theta[j] = float(r[3])
        raw.append((i, j, r[4]))
        mean[i, j] = float(r[5])
    integral = all("." not in c and "e" not in c.lower() for _, _, c in raw)
    counts = np.empty((nx, nt), dtype=np.int64 if integral else float)
    for i, j, c in raw:
        counts[i, j] = int(c) if integral else float(c)
    return CountMap(scan=scan, x=x, theta=theta, counts=counts, mean_rates=mean,
                    noiseless=not integral)


def counts_json(cmap: CountMap, extra: dict | None = None) -> str:
    doc = {
        "scan": cmap.scan.echo(),
        "noiseless": bool(cmap.noiseless),
        "x_m": [float(v) for v in cmap.x],
        "theta_rad": [float(v) for v in cmap.theta],
        "counts": np.asarray(cmap.counts).tolist(),
        "mean_rate_hz": np.asarray(cmap.mean_rates).tolist(),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1, sort_keys=True)


def counts_csv_text(cmap: CountMap) -> str:
    buf = io.StringIO()
    write_counts_csv(cmap, buf)
    return buf.getvalue()
