"""From raw count maps to normalized Wigner maps and reported features."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import curve_fit

from .sagnac import DetectorModel, InterferometerConfig
from .scan import CountMap, blocked_arm_counts
from .wigner import WignerMap, marginal_k, marginal_x

__all__ = [
    "FeatureSet",
    "ReconstructionReport",
    "FeatureError",
    "estimate_background",
    "border_mask",
    "reconstruct_wigner",
    "extract_features",
    "compare_maps",
    "report_json",
    "write_wigner_csv",
    "read_wigner_csv",
]

BORDER_FRACTION = 0.10
FEATURE_THRESHOLD = 0.05
FLANK_UPPER = 0.50
# the diffraction-lobe fit spans |k| <= MIN_SEARCH * k_half
MIN_SEARCH = 2.8
MIN_RUN = 2
# central-section RMS must exceed this multiple of the border noise to count as fringes
FRINGE_SNR = 3.0
SPECTRUM_OVERSAMPLE = 16
# flag a reconstruction whose border sits further than this from zero
PLATEAU_FLAG = 0.02


class FeatureError(ValueError):
    """A requested feature is not present in (or not covered by) the map."""


@dataclass
class FeatureSet:
    support_width: Optional[float] = None
    lobe_separation: Optional[float] = None
    fringe_period_k: Optional[float] = None
    first_zero_theta: Optional[float] = None
    full_width_theta: Optional[float] = None
    fringe_visibility: Optional[float] = None
    thresholds: dict = field(default_factory=lambda: {
        "feature_threshold": FEATURE_THRESHOLD,
        "flank_upper": FLANK_UPPER,
        "border_fraction": BORDER_FRACTION,
    })

    @property
    def divergence_candidates(self) -> dict:
        return {"first_zero_theta": self.first_zero_theta, "full_width_theta": self.full_width_theta}


@dataclass
class ReconstructionReport:
    wigner: WignerMap
    background: float
    scale: float
    plateau_residual: float
    features: Optional[FeatureSet] = None
    comparison: Optional[dict] = None
    warnings: list = field(default_factory=list)


def border_mask(shape: tuple[int, int], fraction: float = BORDER_FRACTION) -> np.ndarray:
    nx, nt = shape
    bx = max(1, int(round(fraction * nx)))
    bt = max(1, int(round(fraction * nt)))
    if 2 * bx >= nx or 2 * bt >= nt:
        raise ValueError(f"raster {shape} is too small to have a border frame and an interior")
    mask = np.zeros(shape, dtype=bool)
    mask[:bx] = mask[-bx:] = True
    mask[:, :bt] = mask[:, -bt:] = True
    return mask


def estimate_background(
    cmap: CountMap,
    method: str = "calibration",
    det: DetectorModel | None = None,
    seed: int | None = None,
) -> float:
    """Constant (non-interfering) part of the counts per pixel.

    ``calibration`` simulates one blocked-arm run per arm over the same raster
    and sums their means (dark counts counted once). ``plateau`` averages the
    outer border frame of the map and warns when that frame is not flat.
    """
    if np.asarray(cmap.counts).size == 0:
        raise ValueError("empty count map")
    if method == "calibration":
        if det is None:
            raise ValueError("calibration background needs the detector model")
        seed = cmap.scan.seed if seed is None else seed
        shape = np.asarray(cmap.counts).shape
        arms = [
            blocked_arm_counts(shape, det, cmap.dwell, seed, arm, cmap.noiseless).mean()
            for arm in (1, 2)
        ]
        return float(sum(arms) - det.dark_rate * cmap.dwell)
    if method == "plateau":
        counts = np.asarray(cmap.counts, dtype=float)
        frame = counts[border_mask(counts.shape)]
        level = float(frame.mean())
        spread = frame.max() - frame.min()
        if spread > 5 * np.sqrt(max(level, 1.0)) + 1e-9 * level:
            warnings.warn(
                f"border frame varies by {spread:.4g} counts around {level:.4g}; "
                "the raster may not leave the field's support and the plateau "
                "background is likely biased",
                stacklevel=2,
            )
        return level
    raise ValueError(f"unknown background method {method!r}")


def reconstruct_wigner(
    cmap: CountMap, background: float, cfg: InterferometerConfig, notes=()
) -> ReconstructionReport:
    """Subtract the constant terms, flip the sign, normalize to unit integral.

    ``notes`` (e.g. warnings raised while estimating the background) are
    carried into the report ahead of its own checks.
    """
    if not background >= 0:
        raise ValueError(f"background must be non-negative, got {background}")
    counts = np.asarray(cmap.counts, dtype=float)
    if not np.any(counts):
        raise ValueError("all-zero count map; normalization undefined")
    k = cfg.k0 * np.sin(np.asarray(cmap.theta, float))
    raw = WignerMap(cmap.x, k, -(counts - background))
    scale = raw.integral()
    if not scale > 0:
        raise ValueError(f"reconstructed map integrates to {scale:.4g}; cannot normalize")
    wmap = WignerMap(raw.x, raw.k, raw.values / scale)

    residual = float(np.mean(wmap.values[border_mask(counts.shape)]))
    notes = [str(n) for n in notes]
    if abs(residual) > PLATEAU_FLAG * wmap.peak():
        notes.append(
            f"border frame of the reconstruction averages {residual:.4g} "
            f"({residual / wmap.peak():.2%} of peak); background is probably mis-estimated"
        )
    return ReconstructionReport(wigner=wmap, background=float(background), scale=float(scale),
                                plateau_residual=residual, warnings=notes)


# ---------------------------------------------------------------- features

def _nearest(axis: np.ndarray, value: float) -> int:
    return int(np.argmin(np.abs(axis - value)))


def _outer_flank_zero(x: np.ndarray, y: np.ndarray, peak: float, side: int) -> float:
    """Extrapolate the outer flank of a section to its zero crossing."""
    # isolated noise spikes are ignored: a run needs MIN_RUN samples
    hot = y > FEATURE_THRESHOLD * peak
    run = np.convolve(hot, np.ones(MIN_RUN, dtype=int), mode="valid") == MIN_RUN
    starts = np.flatnonzero(run)
    if starts.size == 0:
        raise FeatureError("section never rises above the feature threshold")
    above = np.concatenate([starts, starts + MIN_RUN - 1])
    above.sort()
    idx = above[0] if side < 0 else above[-1]
    step = -side  # walk inward
    run = [idx]
    j = idx + step
    while 0 <= j < len(y) and y[j] > FEATURE_THRESHOLD * peak:
        run.append(j)
        j += step
    local = max(y[i] for i in run)
    pts = [i for i in run[: int(np.argmax([y[i] for i in run])) + 1] if y[i] < FLANK_UPPER * local]
    if len(pts) < 2:
        pts = run[:2] if len(run) >= 2 else [idx, idx + step]
    pts = np.array(pts)
    slope, icept = np.polyfit(x[pts], y[pts], 1)
    if slope == 0:
        raise FeatureError("flat flank; cannot locate the support edge")
    return float(-icept / slope)


def _first_sign_change(k: np.ndarray, y: np.ndarray, i0: int, step: int) -> float:
    j = i0
    while 0 <= j + step < len(y):
        a, b = y[j], y[j + step]
        if a > 0 and b <= 0:
            return float(k[j] + (k[j + step] - k[j]) * a / (a - b))
        j += step
    raise FeatureError("no zero crossing of the section within the raster")


def _diffraction_null(k: np.ndarray, y: np.ndarray, i0: int) -> float:
    """First null of a slit-like spectrum, from a sinc^2 fit to its main lobe.

    The fit uses every sample with ``|k| <= MIN_SEARCH * k_half``, where
    ``k_half`` is the half-maximum point; that window reaches just past the
    null into the first side lobe.
    """
    top = y[i0]
    if not top > 0:
        raise FeatureError("lobe spectrum has no positive peak")
    halves = []
    for step in (+1, -1):
        j = i0
        while 0 <= j + step < len(y) and y[j] > 0.5 * top:
            j += step
        if y[j] > 0.5 * top:
            raise FeatureError("lobe spectrum never falls to half maximum within the raster")
        halves.append(abs(k[j]))
    k_half = float(np.mean(halves))
    sel = np.abs(k) <= MIN_SEARCH * k_half
    if sel.sum() < 6 or np.max(np.abs(k)) < MIN_SEARCH * k_half:
        raise FeatureError("raster does not reach past the first diffraction null")

    def model(kk, amp, b, floor):
        return amp * np.sinc(b * kk / np.pi) ** 2 + floor

    # sinc^2(v) = 1/2 at v = 1.3916
    p0 = (top, 1.3916 / k_half, 0.0)
    try:
        (amp, b, _), _ = curve_fit(model, k[sel], y[sel], p0=p0, maxfev=5000)
    except RuntimeError as exc:
        raise FeatureError(f"diffraction fit failed: {exc}") from exc
    if not (amp > 0 and b != 0):
        raise FeatureError("diffraction fit did not converge to a lobe")
    return float(np.pi / abs(b))


def _lobe_region(x: np.ndarray, mx: np.ndarray, center_idx: int) -> np.ndarray:
    thr = FEATURE_THRESHOLD * mx[center_idx]
    lo = hi = center_idx
    while lo - 1 >= 0 and mx[lo - 1] > thr:
        lo -= 1
    while hi + 1 < len(mx) and mx[hi + 1] > thr:
        hi += 1
    return np.arange(lo, hi + 1)


def _centroid(x, w):
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        raise FeatureError("lobe carries no positive weight")
    return float(np.sum(x * w) / w.sum())


def _spectral_period(k: np.ndarray, y: np.ndarray) -> float:
    """Oscillation period along k from the power-weighted spectral peak."""
    n = len(k)
    ku = np.linspace(k.min(), k.max(), n)
    yu = np.interp(ku, k, y)
    yu = yu - yu.mean()
    nfft = SPECTRUM_OVERSAMPLE * n
    power = np.abs(np.fft.rfft(yu, nfft)) ** 2
    freq = np.fft.rfftfreq(nfft, d=ku[1] - ku[0])
    power[0] = 0
    p = int(np.argmax(power))
    lo = hi = p
    while lo > 1 and power[lo - 1] > 0.5 * power[p]:
        lo -= 1
    while hi + 1 < len(power) and power[hi + 1] > 0.5 * power[p]:
        hi += 1
    sel = slice(lo, hi + 1)
    f = np.sum(freq[sel] * power[sel]) / np.sum(power[sel])
    if not f > 0:
        raise FeatureError("no oscillation along k")
    return float(1 / f)


def extract_features(wmap: WignerMap, kind: str, wavelength: float = 633e-9) -> FeatureSet:
    """Quantities quoted for the slit experiments, measured off a Wigner map.

    ``support_width`` comes from the outer flanks of the k = 0 section,
    extrapolated from the band between 5 % and 50 % of the peak down to zero.
    Divergences are reported as two candidates for one slit lobe: the first
    zero of W along k at the lobe centre, and the first minimum of that
    lobe's spectral intensity.
    """
    if kind not in ("tophat", "gaussian", "double_slit"):
        raise FeatureError(f"no feature definitions for field kind {kind!r}")
    x, k, W = wmap.x, wmap.k, wmap.values
    k0 = 2 * np.pi / wavelength
    j0 = _nearest(k, 0.0)
    if abs(k[j0]) > 0.5 * np.min(np.abs(np.diff(k))) + 1e-12:
        raise FeatureError("map has no k = 0 column")
    sec = W[:, j0]
    peak = sec.max()
    if not peak > 0:
        raise FeatureError("k = 0 section has no positive peak")

    fs = FeatureSet()
    left = _outer_flank_zero(x, sec, peak, -1)
    right = _outer_flank_zero(x, sec, peak, +1)
    fs.support_width = right - left
    middle = 0.5 * (left + right)

    mx = marginal_x(wmap)
    if kind == "double_slit":
        centers = []
        for half in (x < middle, x > middle):
            idx = np.flatnonzero(half)
            c = idx[int(np.argmax(mx[idx]))]
            region = np.intersect1d(_lobe_region(x, mx, c), idx)
            centers.append(_centroid(x[region], mx[region]))
        fs.lobe_separation = centers[1] - centers[0]
        lobe_center = centers[1]

        i_mid = _nearest(x, middle)
        central = W[i_mid]
        bx = max(1, int(round(BORDER_FRACTION * len(x))))
        noise = np.std(np.concatenate([W[:bx].ravel(), W[-bx:].ravel()]))
        if np.sqrt(np.mean(central**2)) > FRINGE_SNR * noise and np.max(np.abs(central)) > FEATURE_THRESHOLD * wmap.peak():
            fs.fringe_period_k = _spectral_period(k, central)

        period = 2 * np.pi / fs.lobe_separation
        mk = marginal_k(wmap)
        kk = np.linspace(-period / 2, period / 2, 401)
        if kk[0] < k.min() or kk[-1] > k.max():
            raise FeatureError("raster does not cover one central fringe period")
        m = CubicSpline(k, mk)(kk)
        fs.fringe_visibility = float(np.clip((m.max() - m.min()) / (m.max() + m.min()), 0, 1))
    else:
        lobe_center = _centroid(x, mx)

    ic = _nearest(x, lobe_center)
    zeros = [abs(_first_sign_change(k, W[ic], j0, s)) for s in (+1, -1)]
    fs.first_zero_theta = float(np.arcsin(np.mean(zeros) / k0))

    region = _lobe_region(x, mx, ic)
    lobe_spectrum = wmap.dx[region] @ W[region]
    fs.full_width_theta = float(np.arcsin(_diffraction_null(k, lobe_spectrum, j0) / k0))
    return fs


def compare_maps(a: WignerMap, b: WignerMap) -> dict:
    """``l2_relative`` (of a against b), ``pearson`` and ``peak_shift`` in raster steps."""
    if a.values.shape != b.values.shape or not (
        np.allclose(a.x, b.x, rtol=1e-9, atol=0) and np.allclose(a.k, b.k, rtol=1e-9, atol=0)
    ):
        raise ValueError("maps are sampled on different axes")
    va, vb = a.values.ravel(), b.values.ravel()
    norm_b = np.linalg.norm(vb)
    l2 = float(np.linalg.norm(va - vb) / norm_b) if norm_b > 0 else float("inf")
    if np.std(va) == 0 or np.std(vb) == 0:
        pearson = float("nan")
    else:
        pearson = float(np.corrcoef(va, vb)[0, 1])
    ia = np.array(np.unravel_index(np.argmax(a.values), a.values.shape))
    ib = np.array(np.unravel_index(np.argmax(b.values), b.values.shape))
    return {"l2_relative": l2, "pearson": pearson, "peak_shift": float(np.linalg.norm(ia - ib))}


# ---------------------------------------------------------------- I/O

def write_wigner_csv(wmap: WignerMap, fh) -> None:
    fh.write("x_m,k_radpm,w\n")
    for i, x in enumerate(wmap.x):
        for j, k in enumerate(wmap.k):
            fh.write(f"{float(x)!r},{float(k)!r},{float(wmap.values[i, j])!r}\n")


def read_wigner_csv(fh) -> WignerMap:
    header = fh.readline().strip()
    if header != "x_m,k_radpm,w":
        raise ValueError(f"bad Wigner CSV header {header!r}")
    data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError("Wigner CSV has no rows")
    x = np.unique(data[:, 0])
    k_first = data[data[:, 0] == data[0, 0], 1]
    if len(x) * len(k_first) != len(data):
        raise ValueError(f"Wigner CSV has {len(data)} rows, not a full {len(x)}x{len(k_first)} raster")
    values = data[:, 2].reshape(len(x), len(k_first))
    x_rows = data[:: len(k_first), 0]
    return WignerMap(x_rows, k_first, values)


def _clean(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def report_json(report: ReconstructionReport) -> str:
    doc = {
        "x_m": [float(v) for v in report.wigner.x],
        "k_radpm": [float(v) for v in report.wigner.k],
        "w": report.wigner.values.tolist(),
        "background_counts": report.background,
        "scale": report.scale,
        "plateau_residual": report.plateau_residual,
        "warnings": list(report.warnings),
        "features": None,
        "comparison": None,
    }
    if report.features is not None:
        f = asdict(report.features)
        f["divergence_candidates"] = report.features.divergence_candidates
        doc["features"] = {key: _clean(v) for key, v in f.items()}
    if report.comparison is not None:
        doc["comparison"] = {key: _clean(v) for key, v in report.comparison.items()}
    return json.dumps(doc, indent=1, sort_keys=True)
