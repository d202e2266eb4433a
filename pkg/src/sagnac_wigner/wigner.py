"""Transverse Wigner function of 1D field ensembles.

Convention (1D, unit-normalized states)::

    W(x, k) = (1/pi) * integral dx' <E(x + x') E*(x - x')> exp(-2 i k x')

so that a tilted wave ``exp(i k0 x)`` sits at ``k = +k0`` and the integral of
W over phase space is 1. The lag ``x'`` runs over integer multiples of the
grid spacing, which makes the discrete map periodic in ``k`` with period
``pi / spacing``; :func:`default_k_axis` samples exactly one such period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import EnsembleState, FieldSpec, Grid

__all__ = [
    "WignerMap",
    "PhasePoint",
    "default_k_axis",
    "wigner_transform",
    "wigner_at_point_parity",
    "analytic_wigner",
    "analytic_map",
    "marginal_x",
    "marginal_k",
    "folded_spectral_intensity",
]

IMAG_TOL = 1e-9


@dataclass(frozen=True)
class PhasePoint:
    x: float
    k: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.k)):
            raise ValueError("phase point must be finite")


def _axis_weights(axis: np.ndarray) -> np.ndarray:
    """Quadrature cell widths for a (possibly non-uniform) monotone axis."""
    if axis.size == 1:
        return np.ones(1)
    return np.abs(np.gradient(axis))


@dataclass(frozen=True)
class WignerMap:
    """W sampled on an ``(x, k)`` raster; ``values[i, j] = W(x[i], k[j])``.

    Axes are stored as plain arrays because reconstructed maps have a
    k axis ``k0 sin(theta)`` that is not exactly uniform.
    """

    x: np.ndarray
    k: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        k = np.asarray(self.k, dtype=float).ravel()
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            raise TypeError("Wigner values must be real")
        values = values.astype(float)
        if values.shape != (x.size, k.size):
            raise ValueError(f"values shape {values.shape} != ({x.size}, {k.size})")
        if not np.all(np.isfinite(values)):
            raise ValueError("Wigner values must be finite")
        for name, a in (("x", x), ("k", k)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dx(self) -> np.ndarray:
        return _axis_weights(self.x)

    @property
    def dk(self) -> np.ndarray:
        return _axis_weights(self.k)

    def integral(self) -> float:
        return float(self.dx @ self.values @ self.dk)

    def normalized(self) -> "WignerMap":
        total = self.integral()
        if total == 0:
            raise ValueError("map integrates to zero; normalization undefined")
        return WignerMap(self.x, self.k, self.values / total)

    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))


def default_k_axis(grid: Grid, n_k: int | None = None) -> Grid:
    """Symmetric k axis covering one full period ``pi / spacing`` of the map."""
    n_k = grid.n if n_k is None else int(n_k)
    return Grid(n=n_k, center=0.0, spacing=np.pi / (n_k * grid.spacing))


def _as_k_array(k_axis) -> np.ndarray:
    k = k_axis.positions if isinstance(k_axis, Grid) else np.atleast_1d(np.asarray(k_axis, float))
    if k.size == 0:
        raise ValueError("empty k axis")
    if not np.all(np.isfinite(k)):
        raise ValueError("k axis must be finite")
    return k


def _lag_products(state: EnsembleState, rows: np.ndarray) -> np.ndarray:
    """``F[r, l] = sum_m w_m E_m[j_r + m_l] E_m*[j_r - m_l]`` for lags m in (-n, n)."""
    n = state.grid.n
    lags = np.arange(-(n - 1), n)
    plus = rows[:, None] + lags[None, :]
    minus = rows[:, None] - lags[None, :]
    valid = (plus >= 0) & (plus < n) & (minus >= 0) & (minus < n)
    plus = np.where(valid, plus, 0)
    minus = np.where(valid, minus, 0)
    out = np.zeros((rows.size, lags.size), dtype=complex)
    for w, mode in zip(state.weights, state.modes):
        out += w * mode[plus] * np.conj(mode[minus])
    out[~valid] = 0
    return out


def _fft_period(k_axis, dx: float) -> int | None:
    """FFT length L with k = q * pi / (L dx) for integer q, if the axis allows one."""
    if not isinstance(k_axis, Grid):
        return None
    ratio = np.pi / (k_axis.spacing * dx)
    L = int(round(ratio))
    if L < 1 or abs(ratio - L) > 1e-9 * ratio:
        return None
    q = k_axis.positions / k_axis.spacing
    if np.max(np.abs(q - np.rint(q))) > 1e-9:
        return None
    return L


def _select_rows(grid: Grid, x) -> np.ndarray:
    if x is None:
        return np.arange(grid.n)
    return np.array([grid.nearest_index(v) for v in np.atleast_1d(x)], dtype=int)


def wigner_transform(state: EnsembleState, k_axis, x=None, method: str = "auto") -> WignerMap:
    """Wigner map of ``state`` by quadrature of the correlation integral.

    Parameters
    ----------
    state : EnsembleState
    k_axis : Grid or array_like
        Wavevectors [rad/m]. The FFT route needs a :class:`Grid` whose spacing
        is ``pi / (L * spacing)`` for integer ``L`` and whose points are
        integer multiples of that spacing; otherwise ``auto`` falls back to
        the direct sum.
    x : array_like, optional
        Grid positions to evaluate (nearest sample); all rows by default.
    method : {"auto", "direct", "fft"}

    Returns
    -------
    WignerMap
    """
    grid = state.grid
    if not np.all(np.isfinite(state.modes)):
        raise ValueError("state contains non-finite samples")
    k = _as_k_array(k_axis)
    rows = _select_rows(grid, x)
    dx = grid.spacing
    F = _lag_products(state, rows)
    n = grid.n
    lags = np.arange(-(n - 1), n)

    L = _fft_period(k_axis, dx)
    if method == "auto":
        method = "fft" if L is not None else "direct"
    if method == "fft":
        if L is None:
            raise ValueError("k axis is not commensurate with an FFT of this grid")
        r = -(-(2 * n - 1) // L)  # zero-pad to at least 2n - 1
        P = L * r
        buf = np.zeros((rows.size, P), dtype=complex)
        buf[:, lags % P] = F
        spec = np.fft.fft(buf, axis=1)
        q = np.rint(k / k_axis.spacing).astype(int) * r
        raw = spec[:, q % P]
    elif method == "direct":
        raw = F @ np.exp(-2j * dx * np.multiply.outer(lags, k))
    else:
        raise ValueError(f"unknown method {method!r}")

    raw = raw * dx / np.pi
    scale = max(np.max(np.abs(raw.real)), 1.0)
    if np.max(np.abs(raw.imag)) > IMAG_TOL * scale:
        raise ArithmeticError(
            f"Wigner quadrature left an imaginary residue of {np.max(np.abs(raw.imag)):.3g}"
        )
    return WignerMap(grid.positions[rows], k, raw.real)


def wigner_at_point_parity(state: EnsembleState, p: PhasePoint) -> float:
    """W at one phase-space point as a displaced parity expectation value.

    The state is displaced so that ``p`` lands at the grid centre, reflected
    about the centre, and overlapped with the unreflected copy.
    """
    from .sagnac import displace_by, parity_reflect  # local: sagnac imports this module

    grid = state.grid
    if abs(p.k) >= np.pi / grid.spacing:
        raise ValueError(f"k={p.k} is beyond the grid Nyquist wavevector {np.pi / grid.spacing}")
    shifted = displace_by(state, grid.center - p.x, -p.k)
    mirrored = parity_reflect(shifted)
    overlap = np.sum(np.conj(shifted.modes) * mirrored.modes, axis=1) * grid.spacing
    return float(np.real(shifted.weights @ overlap) / np.pi)


def _tophat_w(x, k, a):
    x, k = np.broadcast_arrays(np.asarray(x, float), np.asarray(k, float))
    base = a - 2 * np.abs(x)
    inside = base > 0
    safe_k = np.where(k == 0, 1.0, k)
    w = np.where(k == 0, base / (np.pi * a), np.sin(safe_k * base) / (np.pi * safe_k * a))
    return np.where(inside, w, 0.0)


def analytic_wigner(spec: FieldSpec, x, k):
    """Closed-form W for tophat, gaussian and double-slit fields centred at 0.

    ``x`` and ``k`` broadcast against each other.
    """
    x = np.asarray(x, float)
    k = np.asarray(k, float)
    if spec.kind == "tophat":
        return _tophat_w(x, k, spec.width)
    if spec.kind == "gaussian":
        s = spec.waist
        return np.exp(-(x**2) / s**2 - (k * s) ** 2) / np.pi
    if spec.kind == "double_slit":
        d, w = spec.spacing, spec.slit_width
        lobes = _tophat_w(x - d / 2, k, w) + _tophat_w(x + d / 2, k, w)
        if spec.coherence == "coherent":
            lobes = lobes + 2 * np.cos(k * d) * _tophat_w(x, k, w)
        return 0.5 * lobes
    raise ValueError(f"no closed form for field kind {spec.kind!r}")


def analytic_map(spec: FieldSpec, x, k, center: float = 0.0) -> WignerMap:
    x = np.asarray(x, float)
    k = np.asarray(k, float)
    values = analytic_wigner(spec, (x - center)[:, None], k[None, :])
    return WignerMap(x, k, values)


def marginal_x(wmap: WignerMap) -> np.ndarray:
    """Position marginal; equals the intensity when k spans a full period."""
    return wmap.values @ wmap.dk


def marginal_k(wmap: WignerMap) -> np.ndarray:
    return wmap.dx @ wmap.values


def folded_spectral_intensity(state: EnsembleState, k) -> np.ndarray:
    """Spectral intensity folded onto the map's k period.

    With lags on the sample grid the k marginal picks up the spectrum
    shifted by ``pi / spacing``; for band-limited states the second term
    vanishes and this is just ``|E~(k)|^2``.
    """
    from .field import spectral_intensity

    k = np.asarray(k, float)
    return spectral_intensity(state, k) + spectral_intensity(state, k - np.pi / state.grid.spacing)
