import math

import numpy as np
import pytest

from aoapos import (AnglePair, ArrayGeometry, SearchGrid, dft_spectrum, estimate,
                    peak_bins, quantize_model, steering_matrix)
from aoapos.dft_estimator import rotation_grid
from aoapos.errors import EstimationDomainError, GeometryError

GEOM16 = ArrayGeometry(n_y=16, n_z=16, d_r=0.5, lambda_c=1.0)
GRID64 = SearchGrid(s1=64, s2=64)


def _angles_from_cosines(y, z):
    phi = math.asin(y)
    theta = math.acos(z / math.cos(phi))
    return AnglePair(theta=theta, phi=phi)


def test_spectrum_of_constant_matrix():
    A = np.ones((16, 16), dtype=complex)
    spec = dft_spectrum(A, GEOM16)
    assert spec[0, 0] == pytest.approx(256.0)
    spec[0, 0] = 0.0
    assert np.max(spec) < 1e-9


def test_spectrum_on_grid_single_bin():
    # direction cosines that put the spatial frequencies exactly on bins 3 and 5
    z = 2 * math.pi * 3 / 16 / math.pi
    y = 2 * math.pi * 5 / 16 / math.pi
    A = steering_matrix(_angles_from_cosines(y, z), GEOM16)
    spec = dft_spectrum(A, GEOM16)
    assert np.unravel_index(np.argmax(spec), spec.shape) == (3, 5)
    total = spec.max() ** 2
    assert total == pytest.approx(np.sum(spec ** 2), rel=1e-9)


def test_spectrum_parseval():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    spec = dft_spectrum(A, GEOM16)
    assert np.sum(spec ** 2) == pytest.approx(256 * np.linalg.norm(A) ** 2, rel=1e-12)


def test_spectrum_shape_mismatch():
    with pytest.raises(GeometryError):
        dft_spectrum(np.ones((4, 4)), GEOM16)


def test_peak_bins_unwrap_and_ties():
    spec = np.zeros((8, 8))
    spec[2, 3] = 1.0
    pb = peak_bins(spec)
    assert (pb.b_n, pb.q_n) == (2, 3)
    spec = np.zeros((8, 8))
    spec[7, 0] = 1.0
    assert peak_bins(spec).b_n == -1
    spec = np.zeros((8, 8))
    spec[2, 3] = spec[3, 3] = 1.0
    assert (peak_bins(spec).b_n, peak_bins(spec).q_n) == (2, 3)
    with pytest.raises(EstimationDomainError):
        peak_bins(np.zeros((4, 4)))


def test_rotation_grid_covers_symmetric_cell():
    g = rotation_grid(16, 64)
    step = 2 * math.pi / (16 * 64)
    assert g[0] == pytest.approx(-math.pi / 16 + step / 2)
    assert g[-1] == pytest.approx(math.pi / 16 - step / 2)
    assert np.allclose(np.diff(g), step)


def test_estimate_on_grid_point_is_exact():
    angles = AnglePair(theta=1.0, phi=0.3)
    st = quantize_model(angles, GEOM16, GRID64)
    snapped = _angles_from_cosines(math.sin(st.phi_hat),
                                   math.cos(st.theta_hat) * math.cos(st.phi_hat))
    st2 = estimate(snapped, GEOM16, GRID64)
    assert st2.phi_hat == snapped.phi
    assert st2.theta_hat == snapped.theta


def test_estimate_sin_error_bound_reference():
    # n=16, s=64: sin-domain half width is 1/1024
    angles = _angles_from_cosines(0.26, 0.4)
    st = estimate(angles, GEOM16, GRID64)
    assert abs(math.sin(st.phi_hat) - 0.26) <= 1 / 1024


def test_quantize_step_size():
    # n_z=16, s2=64, d_r/lambda=0.5 -> sin-domain step 1/512, half-width 1/1024
    st = quantize_model(AnglePair(theta=1.2, phi=0.17), GEOM16, GRID64)
    assert st.a == pytest.approx(1 / 1024)
    assert st.b == pytest.approx(1 / 1024)


def test_paths_bit_identical_and_error_bounds():
    geom = ArrayGeometry(n_y=8, n_z=8, d_r=0.5, lambda_c=1.0)
    grid = SearchGrid(s1=16, s2=16)
    a = 1 / (2 * 8 * 0.5 * 16)
    rng = np.random.default_rng(21)
    for _ in range(200):
        angles = AnglePair(theta=rng.uniform(0.35, math.pi - 0.35),
                           phi=rng.uniform(-1.0, 1.0))
        st1 = estimate(angles, geom, grid)
        st2 = quantize_model(angles, geom, grid)
        assert st1.theta_hat == st2.theta_hat
        assert st1.phi_hat == st2.phi_hat
        assert abs(math.sin(st1.phi_hat) - math.sin(angles.phi)) <= a * (1 + 1e-12)
        z_true = math.cos(angles.theta) * math.cos(angles.phi)
        z_est = math.cos(st1.theta_hat) * math.cos(st1.phi_hat)
        assert abs(z_est - z_true) <= a * (1 + 1e-12)


def test_refinement_halves_error_when_grid_doubles():
    angles = _angles_from_cosines(0.26, 0.4)
    errs = []
    for s in (16, 32, 64):
        st = quantize_model(angles, GEOM16, SearchGrid(s1=s, s2=s))
        errs.append(st.a)
    assert errs[0] == pytest.approx(2 * errs[1]) and errs[1] == pytest.approx(2 * errs[2])


def test_estimate_rejects_out_of_domain():
    # elevation so close to pi/2 that the snapped sine exceeds 1
    geom = ArrayGeometry(n_y=2, n_z=2, d_r=0.5, lambda_c=1.0)
    grid = SearchGrid(s1=1, s2=1)
    with pytest.raises(EstimationDomainError):
        quantize_model(AnglePair(theta=1.5, phi=1.5707), geom, grid)
