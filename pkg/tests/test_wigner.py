import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from sagnac_wigner.field import EnsembleState, FieldSpec, Grid, make_state, mix_states, spectral_intensity
from sagnac_wigner.sagnac import displace_by
from sagnac_wigner.wigner import (
    PhasePoint,
    WignerMap,
    analytic_map,
    analytic_wigner,
    default_k_axis,
    marginal_k,
    marginal_x,
    wigner_at_point_parity,
    wigner_transform,
)

A = 4e-4
TOPHAT = FieldSpec("tophat", width=A)
FINE = Grid(n=1024, center=0.0, spacing=3.2e-6)
SMALL = Grid(n=256, center=0.0, spacing=4e-6)


def brute_force_w(state, j, k):
    """Lag sum written out term by term, no vectorization."""
    n, dx = state.grid.n, state.grid.spacing
    total = 0j
    for w, mode in zip(state.weights, state.modes):
        for lag in range(-(n - 1), n):
            a, b = j + lag, j - lag
            if 0 <= a < n and 0 <= b < n:
                total += w * mode[a] * np.conj(mode[b]) * np.exp(-2j * k * lag * dx)
    return total * dx / np.pi


def test_tophat_origin_and_first_zero():
    s = make_state(TOPHAT, FINE)
    assert wigner_transform(s, [0.0], x=[0.0]).values[0, 0] == pytest.approx(1 / np.pi, rel=1e-12)
    f = lambda k: wigner_transform(s, [k], x=[0.0]).values[0, 0]  # noqa: E731
    root = brentq(f, 0.8 * np.pi / A, 1.2 * np.pi / A, xtol=1e-6)
    assert root == pytest.approx(7854.0, rel=5e-3)
    j = FINE.nearest_index(0.0)
    for k in (0.0, 0.5 * root, root, 3000.0):
        oracle = brute_force_w(s, j, k)
        assert abs(oracle.imag) < 1e-9
        assert f(k) == pytest.approx(oracle.real, abs=1e-12)


def test_hermite_gauss_odd_parity():
    s = make_state(FieldSpec("hermite_gauss", waist=2e-5, order=1), SMALL)
    w = wigner_transform(s, [0.0], x=[0.0]).values[0, 0]
    assert w == pytest.approx(-1 / np.pi, rel=1e-12)
    assert brute_force_w(s, SMALL.center_index, 0.0).real == pytest.approx(w, rel=1e-12)


def test_parity_examples():
    s = make_state(TOPHAT, FINE)
    assert wigner_at_point_parity(s, PhasePoint(0.0, 0.0)) == pytest.approx(1 / np.pi, rel=1e-12)
    assert wigner_at_point_parity(s, PhasePoint(0.5e-3, 0.0)) == 0.0
    with pytest.raises(ValueError, match="Nyquist"):
        wigner_at_point_parity(s, PhasePoint(0.0, np.pi / FINE.spacing))


def test_analytic_examples():
    assert analytic_wigner(TOPHAT, 0.0, 0.0) == pytest.approx(1 / np.pi)
    assert analytic_wigner(TOPHAT, 0.2e-3, 0.0) == 0.0
    assert analytic_wigner(TOPHAT, 0.0, np.pi / A) == pytest.approx(0.0, abs=1e-15)
    ds = FieldSpec("double_slit", spacing=2.8e-4, slit_width=6e-5)
    k = np.linspace(-3e4, 3e4, 6001)
    central = analytic_wigner(ds, 0.0, k)
    # lobes vanish at x = 0, leaving cos(kd) times the single-slit form: period 2 pi / d
    single = analytic_wigner(FieldSpec("tophat", width=6e-5), 0.0, k)
    np.testing.assert_allclose(central, np.cos(k * 2.8e-4) * single, atol=1e-15)
    assert 2 * np.pi / 2.8e-4 == pytest.approx(22440, rel=1e-4)
    x = np.linspace(-3e-4, 3e-4, 601)
    mx = analytic_wigner(ds, x, 0.0)
    # the interference term sits at x = 0; the lobes peak at +-d/2 with height 1/(2 pi)
    for sign in (1, -1):
        outer = sign * x > 1e-4
        assert x[outer][np.argmax(mx[outer])] == pytest.approx(sign * 1.4e-4, abs=1e-6)
    assert analytic_wigner(ds, 1.4e-4, 0.0) == pytest.approx(0.5 / np.pi)
    with pytest.raises(ValueError):
        analytic_wigner(FieldSpec("hermite_gauss", waist=1e-5), 0.0, 0.0)


def test_marginals_examples():
    s = make_state(TOPHAT, FINE)
    W = wigner_transform(s, default_k_axis(FINE))
    mx = marginal_x(W)
    inside = np.abs(FINE.positions) < A / 2
    np.testing.assert_allclose(mx[inside], 2500.0, rtol=1e-6)
    assert np.max(np.abs(mx[~inside])) < 1e-6 * 2500
    assert float(mx @ W.dx) == pytest.approx(1.0, abs=1e-6)

    sigma = 3e-5
    g = make_state(FieldSpec("gaussian", waist=sigma), SMALL)
    Wg = wigner_transform(g, default_k_axis(SMALL))
    expected = np.exp(-(Wg.k * sigma) ** 2) * sigma / np.sqrt(np.pi)
    mk = marginal_k(Wg)
    assert np.linalg.norm(mk - expected) / np.linalg.norm(expected) < 1e-6
    direct = spectral_intensity(g, Wg.k)
    assert np.linalg.norm(mk - direct) / np.linalg.norm(direct) < 1e-6


def test_wigner_map_validation():
    with pytest.raises(TypeError):
        WignerMap([0.0], [0.0], np.array([[1j]]))
    with pytest.raises(ValueError):
        WignerMap([0.0, 1.0], [0.0], np.zeros((1, 1)))
    with pytest.raises(ValueError):
        WignerMap([0.0], [0.0], np.array([[np.nan]]))
    with pytest.raises(ValueError):
        WignerMap([0.0, 1.0], [0.0, 1.0], np.zeros((2, 2))).normalized()


def test_transform_errors():
    s = make_state(TOPHAT, FINE)
    with pytest.raises(ValueError):
        wigner_transform(s, [])
    with pytest.raises(ValueError):
        wigner_transform(s, [np.nan])
    with pytest.raises(ValueError):
        wigner_transform(s, np.array([0.0, 1.0]), method="fft")
    with pytest.raises(ValueError):
        wigner_transform(s, [0.0], method="bogus")
    bad = s.modes.copy()
    bad[0, 3] = np.nan
    with pytest.raises(ValueError):
        EnsembleState(FINE, bad, [1.0], check=False)


# ---------------------------------------------------------------- properties

specs = st.one_of(
    st.builds(lambda a: FieldSpec("tophat", width=a), st.floats(4e-5, 4e-4)),
    st.builds(lambda s: FieldSpec("gaussian", waist=s), st.floats(1e-5, 4e-5)),
    st.builds(lambda s, n: FieldSpec("hermite_gauss", waist=s, order=n),
              st.floats(1e-5, 2.5e-5), st.integers(0, 3)),
    st.builds(lambda d, w, c: FieldSpec("double_slit", spacing=d, slit_width=w, coherence=c),
              st.floats(1.5e-4, 3e-4), st.floats(2e-5, 6e-5), st.sampled_from(["coherent", "incoherent"])),
)
sizes = st.sampled_from([128, 256, 512])


def _grid_for(spec, n):
    # spacing chosen so the support always fits in the middle half
    return Grid(n=n, center=0.0, spacing=4 * spec.support_halfwidth() / n * 1.02)


@given(specs, sizes)
def test_fft_and_direct_agree(spec, n):
    grid = _grid_for(spec, n)
    s = make_state(spec, grid)
    axis = default_k_axis(grid)
    a = wigner_transform(s, axis, method="fft").values
    b = wigner_transform(s, axis.positions, method="direct").values
    assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(b))


@given(specs, sizes, st.data())
def test_route_equivalence(spec, n, data):
    grid = _grid_for(spec, n)
    s = make_state(spec, grid)
    room = grid.extent / 2 - spec.support_halfwidth() - grid.spacing
    xs = grid.positions[np.abs(grid.positions) < room]
    x = data.draw(st.sampled_from(list(xs)))
    k = data.draw(st.floats(-0.99, 0.99)) * np.pi / grid.spacing
    ref = wigner_transform(s, [k], x=[x]).values[0, 0]
    assert abs(wigner_at_point_parity(s, PhasePoint(x, k)) - ref) < 1e-9


@given(specs, sizes)
def test_normalization_and_marginals(spec, n):
    grid = _grid_for(spec, n)
    s = make_state(spec, grid)
    W = wigner_transform(s, default_k_axis(grid))
    assert abs(W.integral() - 1) < 1e-6
    mx = marginal_x(W)
    assert np.linalg.norm(mx - s.intensity()) <= 1e-6 * np.linalg.norm(s.intensity())


@given(st.floats(0, 1))
def test_linearity_in_ensemble(alpha):
    g = Grid(n=256, center=0.0, spacing=2e-6)
    s1 = make_state(FieldSpec("tophat", width=1.2e-4), g)
    s2 = make_state(FieldSpec("hermite_gauss", waist=2e-5, order=2), g)
    axis = default_k_axis(g)
    mixed = wigner_transform(mix_states([s1, s2], [alpha, 1 - alpha]), axis).values
    parts = alpha * wigner_transform(s1, axis).values + (1 - alpha) * wigner_transform(s2, axis).values
    assert np.max(np.abs(mixed - parts)) < 1e-9


@given(st.integers(-20, 20), st.integers(-40, 40))
def test_displacement_covariance(shift, kstep):
    g = Grid(n=256, center=0.0, spacing=2e-6)
    s = make_state(FieldSpec("hermite_gauss", waist=2e-5, order=1), g)
    axis = default_k_axis(g)
    x0 = shift * g.spacing
    k0 = kstep * axis.spacing
    moved = wigner_transform(displace_by(s, x0, k0), axis)
    base = wigner_transform(s, axis)
    # shared raster points: rows shifted by `shift`, columns by `kstep` (k is periodic)
    rows = np.arange(64, 192)
    got = moved.values[rows + shift][:, (np.arange(axis.n) + kstep) % axis.n]
    assert np.max(np.abs(got - base.values[rows])) < 1e-6 * base.peak()


@given(specs)
def test_realness_of_raw_sum(spec):
    grid = _grid_for(spec, 128)
    s = make_state(spec, grid)
    j = grid.center_index
    k = 0.37 * np.pi / grid.spacing
    assert abs(brute_force_w(s, j, k).imag) < 1e-9


def test_analytic_map_center_offset():
    x = np.array([1e-3, 1.1e-3])
    m = analytic_map(TOPHAT, x, [0.0], center=1e-3)
    assert m.values[0, 0] == pytest.approx(1 / np.pi)
    assert m.values[1, 0] == pytest.approx((A - 2e-4) / (np.pi * A))
