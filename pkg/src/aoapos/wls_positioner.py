"""Pseudolinear angle-of-arrival positioning.

Each anchor contributes two linear-in-position equations: an azimuth row
[-cos(theta), sin(theta), 0] and an elevation row
[sin(phi)sin(theta), sin(phi)cos(theta), -cos(phi)], both with right-hand
side g . s_i.  The equation errors scale with -d_i*cos(phi_i) (azimuth block)
and -d_i (elevation block); weighting by the inverse of that scaled
covariance gives the WLS estimate.  Distances are unknown a priori, so
`locate` bootstraps them from an unweighted first pass.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, RankError

CONDITION_LIMIT = 1e12
_TINY_WEIGHT_FLOOR = 1e-300


@dataclass
class PositioningProblem:
    "Anchor positions, per-anchor angle estimates, and per-anchor error variances."

    anchors: np.ndarray
    theta_hats: np.ndarray
    phi_hats: np.ndarray
    sigma2_theta: np.ndarray
    sigma2_phi: np.ndarray

    def __post_init__(self):
        self.anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        self.theta_hats = np.asarray(self.theta_hats, dtype=float)
        self.phi_hats = np.asarray(self.phi_hats, dtype=float)
        self.sigma2_theta = np.asarray(self.sigma2_theta, dtype=float)
        self.sigma2_phi = np.asarray(self.sigma2_phi, dtype=float)
        n = self.anchors.shape[0]
        if self.anchors.shape != (n, 3) or n < 2:
            raise GeometryError("need at least two 3D anchors")
        for arr in (self.theta_hats, self.phi_hats, self.sigma2_theta, self.sigma2_phi):
            if arr.shape != (n,):
                raise GeometryError("per-anchor arrays must match the anchor count")
        if np.any(self.sigma2_theta < 0) or np.any(self.sigma2_phi < 0):
            raise GeometryError("variances must be nonnegative")

    @property
    def n_anchors(self) -> int:
        return self.anchors.shape[0]


@dataclass(frozen=True)
class PositionEstimate:
    q_hat: np.ndarray
    residual_norm: float
    passes: int
    condition_warning: bool


def pseudolinear_system(problem: PositioningProblem, distances):
    "Assemble (G, h, B): stacked azimuth/elevation rows and the error-scale matrix."
    d = np.asarray(distances, dtype=float)
    if np.any(d <= 0):
        raise GeometryError("distances must be positive")
    st, ct = np.sin(problem.theta_hats), np.cos(problem.theta_hats)
    sp, cp = np.sin(problem.phi_hats), np.cos(problem.phi_hats)
    g_theta = np.column_stack([-ct, st, np.zeros_like(st)])
    g_phi = np.column_stack([sp * st, sp * ct, -cp])
    G = np.vstack([g_theta, g_phi])
    h = np.concatenate([(g_theta * problem.anchors).sum(axis=1),
                        (g_phi * problem.anchors).sum(axis=1)])
    B = np.diag(np.concatenate([-d * cp, -d]))
    return G, h, B


def wls_solve(G, h, W):
    "Solve the weighted normal equations (G^T W G) q = G^T W h."
    M = G.T @ W @ G
    if np.linalg.cond(M) > CONDITION_LIMIT:
        raise RankError(f"normal matrix condition number {np.linalg.cond(M):.3e} "
                        f"exceeds {CONDITION_LIMIT:.0e}")
    return np.linalg.solve(M, G.T @ W @ h)


def locate(problem: PositioningProblem, passes: int = 2) -> PositionEstimate:
    """Two-pass solve: unweighted bootstrap for distances, then inverse-covariance WLS.

    Pass 2 (and any further passes) weights each row by 1/(B_ii^2 * sigma2),
    i.e. W = (B Q B^T)^(-1) with Q = diag(sigma2_theta, sigma2_phi).
    """
    if passes < 1:
        raise ValueError("need at least one pass")
    ones = np.ones(problem.n_anchors)
    G, h, _ = pseudolinear_system(problem, ones)
    q = wls_solve(G, h, np.eye(2 * problem.n_anchors))
    sigma2 = np.concatenate([problem.sigma2_theta, problem.sigma2_phi])
    for _ in range(passes - 1):
        d = np.linalg.norm(q - problem.anchors, axis=1)
        if np.any(d <= 0):
            raise GeometryError("bootstrap estimate coincides with an anchor")
        _, _, B = pseudolinear_system(problem, d)
        bdiag = np.diag(B)
        w = 1.0 / np.maximum(bdiag ** 2 * sigma2, _TINY_WEIGHT_FLOOR)
        q = wls_solve(G, h, np.diag(w))
    residual = float(np.linalg.norm(G @ q - h))
    M = G.T @ G
    warn = bool(np.linalg.cond(M) > 1e8)
    return PositionEstimate(q_hat=q, residual_norm=residual, passes=passes,
                            condition_warning=warn)


def geometry_baseline(problem: PositioningProblem) -> np.ndarray:
    "Unweighted single-pass least-squares intersection of the angle lines."
    G, h, _ = pseudolinear_system(problem, np.ones(problem.n_anchors))
    return wls_solve(G, h, np.eye(2 * problem.n_anchors))
