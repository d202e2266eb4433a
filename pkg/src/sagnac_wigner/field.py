"""One-dimensional scalar field ensembles on uniform grids.

A state is a finite convex combination of pure modes sampled on a shared
:class:`Grid`. All lengths are SI (metres), wavevectors in rad/m.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite

__all__ = [
    "Grid",
    "EnsembleState",
    "FieldSpec",
    "make_grid",
    "make_state",
    "mix_states",
    "correlation",
    "fresnel_propagate",
    "total_power",
    "spectral_intensity",
]

FIELD_KINDS = ("tophat", "double_slit", "gaussian", "hermite_gauss")
MIN_SAMPLES_ACROSS = 4
# gaussian-like modes are treated as supported within this many waists
GAUSS_SUPPORT_WAISTS = 6.0


@dataclass(frozen=True)
class Grid:
    """Uniform sample axis with ``x_j = center + (j - n//2) * spacing``."""

    n: int
    center: float
    spacing: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs at least 2 samples, got n={self.n}")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        if not np.isfinite(self.center):
            raise ValueError("grid center must be finite")

    @property
    def positions(self) -> np.ndarray:
        return self.center + (np.arange(self.n) - self.n // 2) * self.spacing

    @property
    def extent(self) -> float:
        return self.n * self.spacing

    @property
    def center_index(self) -> int:
        return self.n // 2

    def nearest_index(self, x: float, tol: float | None = None) -> int:
        """Index of the sample nearest to ``x``.

        Raises ``ValueError`` if ``x`` is off the grid by more than ``tol``
        (default half a spacing).
        """
        tol = 0.5 * self.spacing if tol is None else tol
        j = int(np.rint((x - self.center) / self.spacing)) + self.n // 2
        if j < 0 or j >= self.n:
            raise ValueError(f"position {x!r} lies outside the grid")
        if abs(self.positions[j] - x) > tol * (1 + 1e-12):
            raise ValueError(f"position {x!r} is off-grid by more than {tol!r}")
        return j

    def frequencies(self) -> np.ndarray:
        """Angular spatial frequencies of an unshifted FFT on this grid."""
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)


def make_grid(n: int, extent: float, center: float = 0.0) -> Grid:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not extent > 0:
        raise ValueError(f"extent must be positive, got {extent}")
    return Grid(n=int(n), center=float(center), spacing=float(extent) / n)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EnsembleState:
    """Mixed state ``sum_m w_m |E_m><E_m|``.

    ``modes`` has shape ``(n_modes, grid.n)``; each row is normalized so
    that ``sum |E|^2 * spacing == 1``.
    """

    grid: Grid
    modes: np.ndarray
    weights: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        modes = np.atleast_2d(np.asarray(self.modes, dtype=complex))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if modes.shape[1] != self.grid.n:
            raise ValueError(
                f"mode length {modes.shape[1]} does not match grid.n={self.grid.n}"
            )
        if modes.shape[0] == 0 or weights.shape != (modes.shape[0],):
            raise ValueError("need one weight per mode and at least one mode")
        if not np.all(np.isfinite(modes)):
            raise ValueError("mode amplitudes must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        if self.check:
            norms = np.sum(np.abs(modes) ** 2, axis=1) * self.grid.spacing
            if np.any(np.abs(norms - 1) > 1e-12):
                raise ValueError(f"modes are not normalized: {norms}")
        object.__setattr__(self, "modes", _frozen(modes))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    def with_modes(self, modes: np.ndarray, check: bool = True) -> "EnsembleState":
        return EnsembleState(self.grid, modes, self.weights, check=check)

    def intensity(self) -> np.ndarray:
        return self.weights @ (np.abs(self.modes) ** 2)


@dataclass(frozen=True)
class FieldSpec:
    """Declarative description of one of the test fields.

    Lengths in metres. ``coherence`` only matters for ``double_slit``.
    """

    kind: str
    width: float | None = None
    spacing: float | None = None
    slit_width: float | None = None
    waist: float | None = None
    order: int = 0
    coherence: str = "coherent"

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        required = {
            "tophat": ("width",),
            "double_slit": ("spacing", "slit_width"),
            "gaussian": ("waist",),
            "hermite_gauss": ("waist",),
        }[self.kind]
        for name in required:
            value = getattr(self, name)
            if value is None or not value > 0:
                raise ValueError(f"{self.kind} needs a positive {name}, got {value}")
        if self.kind == "double_slit" and not self.spacing > self.slit_width:
            raise ValueError("double slit spacing must exceed the slit width")
        if self.order < 0 or int(self.order) != self.order:
            raise ValueError(f"order must be a non-negative integer, got {self.order}")
        if self.coherence not in ("coherent", "incoherent"):
            raise ValueError(f"coherence must be coherent|incoherent, got {self.coherence!r}")

    def support_halfwidth(self) -> float:
        if self.kind == "tophat":
            return self.width / 2
        if self.kind == "double_slit":
            return (self.spacing + self.slit_width) / 2
        extra = np.sqrt(2 * self.order + 1) if self.kind == "hermite_gauss" else 0.0
        return (GAUSS_SUPPORT_WAISTS + extra) * self.waist


def _normalize(amp: np.ndarray, spacing: float) -> np.ndarray:
    norm = np.sqrt(np.sum(np.abs(amp) ** 2) * spacing)
    if norm == 0:
        raise ValueError("field has no samples on the grid")
    return amp / norm


def _slit(grid: Grid, center: float, width: float) -> np.ndarray:
    # edges at half-sample positions are excluded, so an odd
    # width/spacing ratio gives exactly width/spacing samples
    x = grid.positions
    inside = np.abs(x - center) < width / 2 - 1e-9 * grid.spacing
    if inside.sum() < MIN_SAMPLES_ACROSS:
        raise ValueError(
            f"slit of width {width} m spans {inside.sum()} samples; "
            f"need at least {MIN_SAMPLES_ACROSS}"
        )
    return inside.astype(complex)


def make_state(spec: FieldSpec, grid: Grid) -> EnsembleState:
    """Build the normalized ensemble described by ``spec``, centred on the grid."""
    x = grid.positions
    c = grid.center
    half = spec.support_halfwidth()
    # index 0 has no mirror partner about the centre, keep it empty
    if c - half <= x[0] or c + half > x[-1]:
        raise ValueError(
            f"{spec.kind} support [{c - half:.4g}, {c + half:.4g}] m exceeds the grid "
            f"[{x[0]:.4g}, {x[-1]:.4g}] m"
        )
    dx = grid.spacing

    if spec.kind == "tophat":
        modes = [_slit(grid, c, spec.width)]
        weights = [1.0]
    elif spec.kind == "double_slit":
        left = _slit(grid, c - spec.spacing / 2, spec.slit_width)
        right = _slit(grid, c + spec.spacing / 2, spec.slit_width)
        if spec.coherence == "coherent":
            modes, weights = [left + right], [1.0]
        else:
            modes, weights = [left, right], [0.5, 0.5]
    else:
        s = spec.waist
        if 2 * s < MIN_SAMPLES_ACROSS * dx:
            raise ValueError(f"waist {s} m is unresolved at spacing {dx} m")
        u = (x - c) / s
        envelope = np.exp(-(u**2) / 2)
        if spec.kind == "gaussian":
            modes = [envelope.astype(complex)]
        else:
            coeffs = np.zeros(spec.order + 1)
            coeffs[-1] = 1.0
            modes = [(hermite.hermval(u, coeffs) * envelope).astype(complex)]
        weights = [1.0]

    modes = np.array([_normalize(m, dx) for m in modes])
    return EnsembleState(grid, modes, np.array(weights))


def mix_states(states: Sequence[EnsembleState], weights: Sequence[float]) -> EnsembleState:
    if len(states) == 0 or len(states) != len(weights):
        raise ValueError("need one weight per state")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-9:
        raise ValueError(f"mixing weights must be non-negative and sum to 1, got {weights}")
    grid = states[0].grid
    if any(s.grid != grid for s in states):
        raise ValueError("states live on different grids")
    modes = np.concatenate([s.modes for s in states])
    w = np.concatenate([a * s.weights for a, s in zip(weights, states)])
    w = w / w.sum()
    return EnsembleState(grid, modes, w)


def correlation(state: EnsembleState, x1: float, x2: float) -> complex:
    """Mutual coherence <E(x1) E*(x2)> at two grid positions."""
    i = state.grid.nearest_index(x1)
    j = state.grid.nearest_index(x2)
    return complex(np.sum(state.weights * state.modes[:, i] * np.conj(state.modes[:, j])))


def total_power(state: EnsembleState) -> float:
    return float(state.weights @ np.sum(np.abs(state.modes) ** 2, axis=1) * state.grid.spacing)


def spectral_intensity(state: EnsembleState, k) -> np.ndarray:
    """Ensemble spectral intensity ``sum_m w_m |E~_m(k)|^2``.

    Uses the unitary transform ``E~(k) = (2 pi)^-1/2 sum_j E_j exp(-i k x_j) dx``
    evaluated directly (no FFT), so ``k`` may be any array.
    """
    k = np.asarray(k, dtype=float)
    x = state.grid.positions
    phase = np.exp(-1j * np.multiply.outer(k, x))
    amp = state.modes @ phase.T * state.grid.spacing / np.sqrt(2 * np.pi)
    return state.weights @ (np.abs(amp) ** 2)


def _bandwidth(state: EnsembleState, tail: float = 1e-6) -> float:
    """Smallest |k| outside which at most ``tail`` of the power lies."""
    kf = state.grid.frequencies()
    spec = state.weights @ (np.abs(np.fft.fft(state.modes, axis=1)) ** 2)
    order = np.argsort(np.abs(kf))
    cum = np.cumsum(spec[order]) / spec.sum()
    idx = min(np.searchsorted(cum, 1 - tail), len(order) - 1)
    return float(np.abs(kf[order][idx]))


def fresnel_propagate(state: EnsembleState, distance: float, wavelength: float) -> EnsembleState:
    """Paraxial free-space propagation by ``distance`` metres.

    Each mode is multiplied by ``exp(-i z k^2 / (2 k0))`` on the FFT
    frequency axis. Raises ``ValueError`` when the spread ``z k_max / k0``
    of the state's bandwidth would exceed a quarter of the grid extent.
    """
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    grid = state.grid
    k0 = 2 * np.pi / wavelength
    if np.pi / grid.spacing >= k0:
        raise ValueError("grid Nyquist wavevector reaches k0; paraxial model invalid")
    if distance == 0:
        return state
    kmax = _bandwidth(state)
    if abs(distance) * kmax / k0 > grid.extent / 4:
        raise ValueError(
            f"propagation by {distance} m spreads the field by "
            f"{abs(distance) * kmax / k0:.3g} m, more than a quarter of the grid "
            f"extent {grid.extent:.3g} m; enlarge the grid"
        )
    kf = grid.frequencies()
    transfer = np.exp(-1j * distance * kf**2 / (2 * k0))
    out = np.fft.ifft(np.fft.fft(state.modes, axis=1) * transfer, axis=1)
    # renormalize away rounding so the state invariant holds at 1e-12
    out = out / np.sqrt(np.sum(np.abs(out) ** 2, axis=1, keepdims=True) * grid.spacing)
    return state.with_modes(out)
