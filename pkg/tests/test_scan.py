import io
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagnac_wigner.field import FieldSpec, Grid, make_grid, make_state
from sagnac_wigner.sagnac import DetectorModel, InterferometerConfig
from sagnac_wigner.scan import (
    CountMap,
    ScanConfig,
    counts_csv_text,
    counts_json,
    expected_count_map,
    pixel_generator,
    read_counts_csv,
    run_scan,
    sample_counts,
    write_counts_csv,
)

CFG = InterferometerConfig()
DET = DetectorModel.from_far_field_rate(1e5, eta=0.11, dark_rate=25.0)
ETA_PHI = DET.eta * DET.photon_flux
GRID = Grid(n=512, center=0.0, spacing=2e-6)
TOPHAT = make_state(FieldSpec("tophat", width=2e-4), GRID)
# 17 x 17 raster through the origin, x on whole samples
SCAN = ScanConfig(make_grid(17, 17 * 8e-6), make_grid(17, 0.006), dwell=0.1, seed=11)


def test_scan_config_validation():
    with pytest.raises(ValueError):
        replace(SCAN, dwell=0.0)
    with pytest.raises(ValueError):
        replace(SCAN, seed=-1)
    wide = replace(SCAN, theta_points=make_grid(9, 0.4))
    with pytest.raises(ValueError, match="NA"):
        expected_count_map(TOPHAT, wide, DET, CFG)


def test_expected_map_examples():
    m = expected_count_map(TOPHAT, SCAN, DET, CFG)
    i0, j0 = 8, 8
    assert m.x[i0] == 0 and m.theta[j0] == 0
    assert m.mean_rates[i0, j0] == pytest.approx(DET.dark_rate, abs=1e-9 * ETA_PHI)
    np.testing.assert_array_equal(m.counts, m.mean_rates * SCAN.dwell)
    twice = expected_count_map(TOPHAT, replace(SCAN, dwell=0.2), DET, CFG)
    np.testing.assert_array_equal(twice.counts, 2 * m.counts)

    far = replace(SCAN, x_points=make_grid(5, 5 * 2e-6, center=3e-4))
    fm = expected_count_map(TOPHAT, far, DET, CFG)
    np.testing.assert_array_equal(fm.mean_rates, ETA_PHI / 2 + DET.dark_rate)


def test_raster_symmetry_for_even_state():
    m = expected_count_map(TOPHAT, SCAN, DET, CFG)
    np.testing.assert_allclose(m.mean_rates, m.mean_rates[::-1, ::-1], atol=1e-9 * ETA_PHI)


def test_sample_counts_examples():
    m = expected_count_map(TOPHAT, SCAN, DetectorModel(eta=DET.eta, photon_flux=DET.photon_flux), CFG)
    a = sample_counts(m, seed=5)
    b = sample_counts(m, seed=5)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.counts.dtype.kind == "i" and not a.noiseless
    assert a.counts[8, 8] == 0  # zero mean at the origin without dark counts
    c = sample_counts(m, seed=6)
    assert not np.array_equal(a.counts, c.counts)
    np.testing.assert_array_equal(a.mean_rates, c.mean_rates)
    with pytest.raises(ValueError):
        sample_counts(a)
    neg = replace(m, mean_rates=-np.ones_like(m.mean_rates), counts=np.zeros_like(m.counts))
    with pytest.raises(ValueError, match="negative"):
        sample_counts(neg)


def test_run_scan_noiseless_is_expected():
    a = run_scan(TOPHAT, replace(SCAN, noiseless=True), DET, CFG)
    b = expected_count_map(TOPHAT, SCAN, DET, CFG)
    np.testing.assert_array_equal(a.counts, b.counts)


def test_poisson_variance():
    flat = CountMap(SCAN, np.zeros(1000), np.zeros(1), np.full((1000, 1), 1e4),
                    np.full((1000, 1), 1e5))
    c = sample_counts(flat, seed=123).counts.astype(float)
    assert 0.9 <= c.var(ddof=1) / c.mean() <= 1.1


def test_mean_convergence():
    m = expected_count_map(TOPHAT, SCAN, DET, CFG)
    draws = np.array([sample_counts(m, seed=s).counts for s in range(100)], dtype=float)
    err = draws.mean(axis=0) - m.counts
    sigma = np.sqrt(np.maximum(m.counts, 1e-12) / 100)
    assert np.all(np.abs(err) <= 5 * sigma + 1e-12)


@settings(max_examples=10)
@given(st.permutations(range(17 * 17)), st.integers(0, 2**64 - 1))
def test_order_independence(order, seed):
    m = expected_count_map(TOPHAT, SCAN, DET, CFG)
    ref = sample_counts(m, seed=seed).counts
    manual = np.empty_like(ref)
    mean = m.mean_rates * m.dwell
    for flat in order:
        i, j = divmod(flat, 17)
        manual[i, j] = pixel_generator(seed, i, j).poisson(mean[i, j])
    np.testing.assert_array_equal(manual, ref)
    np.testing.assert_array_equal(sample_counts(m, seed=seed, threads=4).counts, ref)


def test_threads_env(monkeypatch):
    m = expected_count_map(TOPHAT, SCAN, DET, CFG)
    monkeypatch.setenv("SAGNAC_WIGNER_THREADS", "3")
    threaded = expected_count_map(TOPHAT, SCAN, DET, CFG)
    np.testing.assert_array_equal(threaded.mean_rates, m.mean_rates)
    assert counts_csv_text(sample_counts(threaded)) == counts_csv_text(sample_counts(m))


def test_csv_round_trip():
    noisy = run_scan(TOPHAT, SCAN, DET, CFG)
    text = counts_csv_text(noisy)
    assert text.splitlines()[0] == "ix,itheta,x_m,theta_rad,counts,mean_rate_hz"
    back = read_counts_csv(io.StringIO(text), SCAN)
    np.testing.assert_array_equal(back.counts, noisy.counts)
    np.testing.assert_array_equal(back.mean_rates, noisy.mean_rates)
    np.testing.assert_array_equal(back.x, noisy.x)
    assert not back.noiseless

    clean = run_scan(TOPHAT, replace(SCAN, noiseless=True), DET, CFG)
    back = read_counts_csv(io.StringIO(counts_csv_text(clean)), SCAN)
    np.testing.assert_array_equal(back.counts, clean.counts)
    assert back.noiseless


def test_csv_rejects_wrong_raster():
    text = counts_csv_text(run_scan(TOPHAT, SCAN, DET, CFG))
    short = "\n".join(text.splitlines()[:-3]) + "\n"
    with pytest.raises(ValueError, match="data rows"):
        read_counts_csv(io.StringIO(short), SCAN)
    with pytest.raises(ValueError, match="header"):
        read_counts_csv(io.StringIO("a,b\n"), SCAN)


def test_counts_json():
    m = run_scan(TOPHAT, SCAN, DET, CFG)
    doc = json.loads(counts_json(m, {"note": 1}))
    assert doc["scan"]["seed"] == 11 and doc["note"] == 1
    assert np.array(doc["counts"]).shape == (17, 17)


def test_countmap_validation():
    with pytest.raises(ValueError):
        CountMap(SCAN, np.zeros(2), np.zeros(2), np.zeros((2, 3)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CountMap(SCAN, np.zeros(1), np.zeros(1), -np.ones((1, 1)), np.zeros((1, 1)))


def test_write_is_deterministic():
    m = run_scan(TOPHAT, SCAN, DET, CFG)
    a, b = io.StringIO(), io.StringIO()
    write_counts_csv(m, a)
    write_counts_csv(run_scan(TOPHAT, SCAN, DET, CFG), b)
    assert a.getvalue() == b.getvalue()
