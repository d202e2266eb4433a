"""Forward model of the parity-inverting Sagnac interferometer.

The steering mirror displaces the input state in phase space, the two
counter-propagating arms differ by a parity reflection, and the detector
sees the output port of a 50:50 splitter::

    N = (eta * flux / 4) * (|E_d|^2 + |P E_d|^2 - 2 Re <E_d | P E_d>)

The cross term equals ``-eta * flux * (pi / 2) * W(x, k)`` in one dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .field import EnsembleState, Grid

__all__ = [
    "MirrorSetting",
    "DetectorModel",
    "InterferometerConfig",
    "RateTriple",
    "tilt_to_wavevector",
    "wavevector_to_tilt",
    "quantize_shift",
    "displace_by",
    "displace_state",
    "parity_reflect",
    "rotate_wavefront_90",
    "interfere",
    "linear_uniformity",
]

# power allowed to fall off the grid edge during a shift or reflection
EDGE_LOSS_TOL = 1e-12


@dataclass(frozen=True)
class MirrorSetting:
    x_shift: float
    theta: float

    def __post_init__(self):
        if not abs(self.theta) < np.pi / 2:
            raise ValueError(f"tilt {self.theta} rad must satisfy |theta| < pi/2")


@dataclass(frozen=True)
class InterferometerConfig:
    wavelength: float = 633e-9
    na_limit: float = 0.09
    split_ratio: float = 0.5

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if not 0 < self.na_limit <= 1:
            raise ValueError("na_limit must be in (0, 1]")
        if self.split_ratio != 0.5:
            raise ValueError("only a 50:50 beam splitter is modelled")

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength


def linear_uniformity(grid: Grid, min_value: float = 0.85) -> np.ndarray:
    """Efficiency falling linearly from 1 at the left grid edge to ``min_value``."""
    return np.linspace(1.0, min_value, grid.n)


@dataclass(frozen=True)
class DetectorModel:
    """Single-multiplier detector: ``eta`` absorbs every loss in the chain.

    ``uniformity`` maps a :class:`Grid` to per-sample relative efficiency
    in (0, 1]; ``None`` means a flat response.
    """

    eta: float = 0.11
    photon_flux: float = 2e5 / 0.11
    dark_rate: float = 0.0
    uniformity: Optional[Callable[[Grid], np.ndarray]] = None

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not self.photon_flux >= 0:
            raise ValueError("photon_flux must be non-negative")
        if not self.dark_rate >= 0:
            raise ValueError("dark_rate must be non-negative")

    @classmethod
    def from_far_field_rate(cls, rate: float, eta: float = 0.11, **kw) -> "DetectorModel":
        """Detector whose count rate with no interference is ``rate`` [1/s]."""
        return cls(eta=eta, photon_flux=2 * rate / eta, **kw)

    @property
    def far_field_rate(self) -> float:
        return self.eta * self.photon_flux / 2

    def profile(self, grid: Grid) -> np.ndarray | None:
        if self.uniformity is None:
            return None
        u = np.asarray(self.uniformity(grid), dtype=float)
        if u.shape != (grid.n,) or np.any(u <= 0) or np.any(u > 1):
            raise ValueError("uniformity profile must give values in (0, 1] per sample")
        return u


@dataclass(frozen=True)
class RateTriple:
    n1: float
    n2: float
    n12: float

    @property
    def total(self) -> float:
        return self.n1 + self.n2 + self.n12


def tilt_to_wavevector(theta: float, wavelength: float) -> float:
    if not abs(theta) < np.pi / 2:
        raise ValueError(f"tilt {theta} rad out of range")
    return 2 * np.pi / wavelength * np.sin(theta)


def wavevector_to_tilt(k, wavelength: float):
    return np.arcsin(np.asarray(k) * wavelength / (2 * np.pi))


def quantize_shift(grid: Grid, x_shift: float) -> tuple[int, float]:
    """Whole-sample shift nearest to ``x_shift`` and the residual it leaves."""
    steps = int(np.rint(x_shift / grid.spacing))
    return steps, x_shift - steps * grid.spacing


def _shift_samples(modes: np.ndarray, steps: int) -> np.ndarray:
    out = np.zeros_like(modes)
    n = modes.shape[1]
    if abs(steps) >= n:
        return out
    if steps >= 0:
        out[:, steps:] = modes[:, : n - steps]
    else:
        out[:, :steps] = modes[:, -steps:]
    return out


def _check_loss(before: np.ndarray, after: np.ndarray, spacing: float, what: str):
    lost = np.sum(np.abs(before) ** 2, axis=1) - np.sum(np.abs(after) ** 2, axis=1)
    if np.any(lost * spacing > EDGE_LOSS_TOL):
        raise ValueError(f"{what} pushes {np.max(lost) * spacing:.3g} of the power off the grid")


def displace_by(state: EnsembleState, x_shift: float, k: float) -> EnsembleState:
    """``E(x) -> E(x - x_shift) exp(i k x)`` with the shift rounded to whole samples."""
    grid = state.grid
    steps, _ = quantize_shift(grid, x_shift)
    shifted = _shift_samples(state.modes, steps)
    _check_loss(state.modes, shifted, grid.spacing, f"shift by {x_shift} m")
    if k != 0:
        shifted = shifted * np.exp(1j * k * grid.positions)
    return state.with_modes(shifted, check=False)


def displace_state(
    state: EnsembleState, setting: MirrorSetting, cfg: InterferometerConfig
) -> EnsembleState:
    """Phase-space displacement imposed by the steering mirror."""
    if abs(np.sin(setting.theta)) > cfg.na_limit:
        raise ValueError(
            f"tilt {setting.theta} rad exceeds the numerical aperture {cfg.na_limit}"
        )
    k = tilt_to_wavevector(setting.theta, cfg.wavelength)
    return displace_by(state, setting.x_shift, k)


def parity_reflect(state: EnsembleState) -> EnsembleState:
    """Mirror every mode about the grid centre sample.

    Index ``j`` maps to ``n - j``; with an even ``n`` sample 0 has no partner
    and must carry no power.
    """
    modes = state.modes
    n = state.grid.n
    c = state.grid.center_index
    out = np.zeros_like(modes)
    j = np.arange(n)
    src = 2 * c - j
    ok = (src >= 0) & (src < n)
    out[:, ok] = modes[:, src[ok]]
    _check_loss(modes, out, state.grid.spacing, "parity reflection")
    return state.with_modes(out, check=False)


def rotate_wavefront_90(field2d: np.ndarray, sense: str) -> np.ndarray:
    """Top-mirror wavefront map about the array centre.

    ``cw``: E(x, y) -> E(y, x); ``ccw``: E(x, y) -> E(-y, -x). Arrays are
    indexed ``[ix, iy]``; reflection uses ``i -> n - 1 - i`` so the centre
    lies midway between samples for even ``n``.
    """
    a = np.asarray(field2d)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"wavefront must be a square 2D array, got shape {a.shape}")
    if sense == "cw":
        return a.T.copy()
    if sense == "ccw":
        return a[::-1, ::-1].T.copy()
    raise ValueError(f"sense must be 'cw' or 'ccw', got {sense!r}")


def interfere(
    state: EnsembleState,
    setting: MirrorSetting,
    det: DetectorModel,
    cfg: InterferometerConfig,
) -> RateTriple:
    """Mean detector rates for one steering-mirror setting.

    The setting (x, theta) probes W at ``(x, k0 sin theta)``: the mirror
    brings that point to the optical axis, one arm is parity reflected, and
    the output port carries ``(E_d - P E_d) / 2``.
    """
    grid = state.grid
    probe = MirrorSetting(grid.center - setting.x_shift, -setting.theta)
    beam = displace_state(state, probe, cfg)
    mirrored = parity_reflect(beam)

    dx = grid.spacing
    a = beam.modes
    b = mirrored.modes
    weight = det.profile(grid)
    if weight is None:
        # flat response: each arm carries the full (normalized) mode power
        p1 = p2 = np.ones(state.n_modes)
        cross = np.real(np.sum(np.conj(a) * b, axis=1)) * dx
    else:
        p1 = np.sum(weight * np.abs(a) ** 2, axis=1) * dx
        p2 = np.sum(weight * np.abs(b) ** 2, axis=1) * dx
        cross = np.real(np.sum(weight * np.conj(a) * b, axis=1)) * dx

    w = state.weights
    scale = det.eta * det.photon_flux
    return RateTriple(
        n1=float(scale / 4 * (w @ p1)),
        n2=float(scale / 4 * (w @ p2)),
        n12=float(-scale / 2 * (w @ cross)),
    )
