"""Uniform planar array geometry and line-of-sight channel primitives.

Conventions used throughout the package: the azimuth angle theta is measured
as atan2(dx, dy) and the elevation angle phi as atan2(dz, hypot(dx, dy)),
where (dx, dy, dz) is the target position minus the anchor position.  Under
this convention the array measures the direction cosines sin(phi) (z-axis)
and cos(theta)*cos(phi) (y-axis), and the pseudolinear positioning residuals
vanish exactly at the true position.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError


@dataclass(frozen=True)
class ArrayGeometry:
    """Rectangular antenna grid of one anchor.

    n_y, n_z are the antenna counts along the y and z axes, d_r the element
    spacing and lambda_c the carrier wavelength (both in meters).
    """

    n_y: int
    n_z: int
    d_r: float
    lambda_c: float

    def __post_init__(self):
        if self.n_y < 1 or self.n_z < 1:
            raise GeometryError("antenna counts must be >= 1")
        if not (self.d_r > 0 and self.lambda_c > 0):
            raise GeometryError("spacing and wavelength must be positive")
        if self.d_r > self.lambda_c / 2:
            raise GeometryError("element spacing above lambda/2 aliases spatially")


@dataclass(frozen=True)
class AnglePair:
    """Azimuth/elevation pair in radians.

    The canonical azimuth domain is (0, pi); geometries behind the array
    (negative x offset) produce azimuths outside it and are tolerated here so
    that positioning identities remain checkable, but the estimation chain
    enforces its own stricter domain.
    """

    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise GeometryError("angles must be finite")
        if not -math.pi / 2 < self.phi < math.pi / 2:
            raise GeometryError("elevation must lie in (-pi/2, pi/2)")


@dataclass(frozen=True)
class LosPath:
    "Line-of-sight path: distance (m), complex gain, and arrival angles."

    distance: float
    gain: complex
    angles: AnglePair


def spatial_frequencies(angles: AnglePair, geom: ArrayGeometry):
    "Per-element phase increments (u along y, v along z) of the plane wave."
    u = 2.0 * np.pi * geom.d_r * math.cos(angles.theta) * math.cos(angles.phi) / geom.lambda_c
    v = 2.0 * np.pi * geom.d_r * math.sin(angles.phi) / geom.lambda_c
    return u, v


def steering_matrix(angles: AnglePair, geom: ArrayGeometry) -> np.ndarray:
    """Array response, entry (iy, iz) = exp(-j*(iy*u + iz*v)).

    Depends on the angles only through the direction cosines
    cos(theta)*cos(phi) and sin(phi); all entries have unit modulus.
    """
    u, v = spatial_frequencies(angles, geom)
    iy = np.arange(geom.n_y)[:, None]
    iz = np.arange(geom.n_z)[None, :]
    return np.exp(-1j * (iy * u + iz * v))


def los_gain(distance: float, geom: ArrayGeometry) -> complex:
    "Free-space LoS channel gain: magnitude lambda/(4*pi*d), phase -2*pi*d/lambda."
    if not distance > 0:
        raise GeometryError("distance must be positive")
    magnitude = geom.lambda_c / (4.0 * np.pi * distance)
    phase = -2.0 * np.pi * distance / geom.lambda_c
    phase = math.remainder(phase, 2.0 * np.pi)  # (-pi, pi]
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    return magnitude * complex(math.cos(phase), math.sin(phase))


def true_angles(anchor, mu) -> AnglePair:
    """Exact arrival angles of mu seen from anchor.

    theta = atan2(dx, dy), phi = atan2(dz, hypot(dx, dy)); the direction
    cosines then satisfy sin(phi) = dz/d and cos(theta)*cos(phi) = dy/d.
    """
    delta = np.asarray(mu, dtype=float) - np.asarray(anchor, dtype=float)
    if not np.all(np.isfinite(delta)) or np.linalg.norm(delta) < 1e-12:
        raise GeometryError("target coincides with anchor")
    dx, dy, dz = delta
    rho = math.hypot(dx, dy)
    theta = math.atan2(dx, dy)
    phi = math.atan2(dz, rho)
    return AnglePair(theta=theta, phi=phi)
