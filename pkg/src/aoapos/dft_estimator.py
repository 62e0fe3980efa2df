"""2D-DFT beamspace angle estimation with rotation refinement.

The coarse stage locates the peak bin of the 2D transform of the array
response; the fine stage scans a progressive phase ramp ("rotation") over a
cell-centered grid inside one DFT bin and re-peaks.  `quantize_model` is the
provably equivalent fast path: it snaps the true direction cosines to the
composite estimate grid by arithmetic instead of searching, selecting the
same bins and rotation indices and evaluating the same final expressions, so
the two paths agree bit for bit (for arrays with at least two elements per
scanned axis; a single-element axis makes the rotation scan flat, in which
case the search path falls back to the first grid point by the tie rule).
"""

import math
from dataclasses import dataclass

import numpy as np

from .array_model import AnglePair, ArrayGeometry, steering_matrix
from .errors import EstimationDomainError, GeometryError
from .error_pdf import EstimateState, half_widths

CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class SearchGrid:
    "Rotation grid sizes: s1 points along the y-axis bin, s2 along the z-axis bin."

    s1: int
    s2: int

    def __post_init__(self):
        if self.s1 < 1 or self.s2 < 1:
            raise GeometryError("grid sizes must be >= 1")


@dataclass(frozen=True)
class PeakBins:
    "Unwrapped DFT peak indices, b_n in [-n_y/2, n_y/2), q_n in [-n_z/2, n_z/2)."

    b_n: int
    q_n: int


def rotation_grid(n: int, s_count: int) -> np.ndarray:
    """Cell-centered rotation offsets covering [-pi/n, pi/n].

    varpi(s) = -pi/n + (s - 1/2) * 2*pi/(n*s_count) for s = 1..s_count, so the
    composite (bin, rotation) grid is uniform with half-width pi/(n*s_count).
    """
    s = np.arange(1, s_count + 1, dtype=float)
    return -math.pi / n + (s - 0.5) * (2.0 * math.pi / (n * s_count))


def dft_spectrum(A: np.ndarray, geom: ArrayGeometry) -> np.ndarray:
    """Magnitudes of the 2D transform matched to the steering-matrix phases.

    Entry (b, q) = |sum_{iy,iz} A[iy,iz] * exp(+j*2*pi*(b*iy/n_y + q*iz/n_z))|,
    so a steering matrix with spatial frequency u peaks at bin b ~ n_y*u/(2*pi).
    """
    A = np.asarray(A)
    if A.shape != (geom.n_y, geom.n_z):
        raise GeometryError(f"expected shape {(geom.n_y, geom.n_z)}, got {A.shape}")
    return np.abs(np.fft.fft2(A.conj()))


def _unwrap_bin(raw: int, n: int) -> int:
    "Map raw DFT index to the symmetric range [-n/2, n/2)."
    return raw - n if raw >= (n + 1) // 2 else raw


def peak_bins(spectrum: np.ndarray) -> PeakBins:
    "Argmax bin with symmetric unwrapping; ties resolved to the smallest (b, q)."
    spectrum = np.asarray(spectrum)
    top = spectrum.max()
    if not top > 0:
        raise EstimationDomainError("spectrum carries no energy")
    n_y, n_z = spectrum.shape
    hits = np.argwhere(spectrum == top)
    pairs = sorted((_unwrap_bin(int(i), n_y), _unwrap_bin(int(j), n_z)) for i, j in hits)
    return PeakBins(b_n=pairs[0][0], q_n=pairs[0][1])


def _clamped_arcsin(value: float) -> float:
    if abs(value) > 1.0 + CLAMP_TOL:
        raise EstimationDomainError(f"arcsin argument {value} out of range")
    return math.asin(min(1.0, max(-1.0, value)))


def _clamped_arccos(value: float) -> float:
    if abs(value) > 1.0 + CLAMP_TOL:
        raise EstimationDomainError(f"arccos argument {value} out of range")
    return math.acos(min(1.0, max(-1.0, value)))


def _grid_value(bin_index: int, varpi: float, n: int, geom: ArrayGeometry) -> float:
    "Direction-cosine estimate for a (bin, rotation) pair; shared by both paths."
    lam, d = geom.lambda_c, geom.d_r
    return lam * bin_index / (n * d) - lam * varpi / (2.0 * math.pi * d)


def _state_from_cosines(y_est: float, z_est: float, geom: ArrayGeometry,
                        grid: SearchGrid) -> EstimateState:
    phi_hat = _clamped_arcsin(y_est)
    x_est = math.cos(phi_hat)
    if x_est < 1e-15:
        raise EstimationDomainError("estimated elevation too close to +-pi/2")
    theta_hat = _clamped_arccos(z_est / x_est)
    a, b = half_widths(geom, grid)
    return EstimateState(theta_hat=theta_hat, phi_hat=phi_hat, a=a, b=b)


def estimate(true_angles: AnglePair, geom: ArrayGeometry, grid: SearchGrid) -> EstimateState:
    """Full search path: DFT peak, then rotation scan along each axis.

    Returns the estimate state with sin(phi_hat) and cos(theta_hat)*cos(phi_hat)
    on the composite grid of `rotation_grid` offsets around the peak bin.
    """
    A = steering_matrix(true_angles, geom)
    bins = peak_bins(dft_spectrum(A, geom))

    iy = np.arange(geom.n_y)
    iz = np.arange(geom.n_z)

    # Collapse the z axis at its peak bin, then scan the y-axis rotation.
    col = A @ np.exp(2j * math.pi * bins.q_n * iz / geom.n_z)
    varpi1 = rotation_grid(geom.n_y, grid.s1)
    ramps1 = np.exp(1j * iy[:, None] * (2.0 * math.pi * bins.b_n / geom.n_y - varpi1[None, :]))
    j1 = int(np.argmax(np.abs(col @ ramps1)))

    row = A.T @ np.exp(2j * math.pi * bins.b_n * iy / geom.n_y)
    varpi2 = rotation_grid(geom.n_z, grid.s2)
    ramps2 = np.exp(1j * iz[:, None] * (2.0 * math.pi * bins.q_n / geom.n_z - varpi2[None, :]))
    j2 = int(np.argmax(np.abs(row @ ramps2)))

    b_f = _alias_bin(bins.b_n, float(varpi1[j1]), geom.n_y)
    q_f = _alias_bin(bins.q_n, float(varpi2[j2]), geom.n_z)
    z_est = _grid_value(b_f, float(varpi1[j1]), geom.n_y, geom)
    y_est = _grid_value(q_f, float(varpi2[j2]), geom.n_z, geom)
    return _state_from_cosines(y_est, z_est, geom, grid)


def _nearest_bin(freq: float, n: int) -> int:
    """Nearest DFT bin to the spatial frequency, in real (unfolded) frequency.

    Physical frequencies satisfy |freq| <= pi for d_r <= lambda/2, so the
    result lies in [-n/2, n/2]; exact midpoints take the lower bin.  The +n/2
    edge bin is the alias of -n/2 that keeps the rotation-refined estimate
    inside the physical range.
    """
    x = n * freq / (2.0 * math.pi)
    k0 = math.floor(x)
    k = k0 if (x - k0) <= (k0 + 1 - x) else k0 + 1
    return int(k)


def _alias_bin(b: int, varpi_val: float, n: int) -> int:
    """Signed bin index to use in the estimate formula.

    The rotation scan cannot distinguish the two aliases of the edge bin
    -n/2 (their ramps coincide modulo 2*pi); a positive best rotation offset
    means the underlying frequency sits just below +pi, so the +n/2 alias is
    the physical one.
    """
    if 2 * b == -n and varpi_val > 0:
        return n // 2
    return b


def _nearest_rotation(freq: float, bin_index: int, n: int, s_count: int) -> int:
    "Index of the rotation offset closest to the residual frequency (first on ties)."
    varpi = rotation_grid(n, s_count)
    target = 2.0 * math.pi * bin_index / n - freq
    return int(np.argmin(np.abs(target - varpi)))


def quantize_model(true_angles: AnglePair, geom: ArrayGeometry, grid: SearchGrid) -> EstimateState:
    "Fast path: snap the true direction cosines to the composite estimate grid."
    lam, d = geom.lambda_c, geom.d_r
    y_true = math.sin(true_angles.phi)
    z_true = math.cos(true_angles.theta) * math.cos(true_angles.phi)
    u_freq = 2.0 * math.pi * d * z_true / lam
    v_freq = 2.0 * math.pi * d * y_true / lam

    b_n = _nearest_bin(u_freq, geom.n_y)
    q_n = _nearest_bin(v_freq, geom.n_z)
    j1 = _nearest_rotation(u_freq, b_n, geom.n_y, grid.s1)
    j2 = _nearest_rotation(v_freq, q_n, geom.n_z, grid.s2)

    varpi1 = rotation_grid(geom.n_y, grid.s1)
    varpi2 = rotation_grid(geom.n_z, grid.s2)
    z_est = _grid_value(b_n, float(varpi1[j1]), geom.n_y, geom)
    y_est = _grid_value(q_n, float(varpi2[j2]), geom.n_z, geom)
    return _state_from_cosines(y_est, z_est, geom, grid)
