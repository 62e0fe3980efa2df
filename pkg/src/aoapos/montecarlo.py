"""Reproducible sampling oracles and positioning experiments.

All randomness flows through a counter-based Philox generator keyed by the
scenario seed, with every trial's draws produced in one vectorized batch, so
results are bit-reproducible regardless of how work would be partitioned.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .array_model import ArrayGeometry, true_angles
from .dft_estimator import SearchGrid
from .error_pdf import EstimateState, half_widths
from .error_variance import conditional_variances
from .errors import GeometryError

_CLIP_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    "Full experiment description: anchors, target, array, grid, trials, seed."

    anchors: tuple
    mu: tuple
    geom: ArrayGeometry
    grid: SearchGrid
    trials: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(tuple(float(c) for c in s)
                                                  for s in self.anchors))
        object.__setattr__(self, "mu", tuple(float(c) for c in self.mu))
        if self.trials < 1:
            raise GeometryError("need at least one trial")
        for s in self.anchors:
            if not self.mu[0] - s[0] > 0:
                raise GeometryError("target must have positive x offset from every anchor")


@dataclass(frozen=True)
class ExperimentResult:
    mse: float
    failure_fraction: float
    trials: int


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def sample_conditional_errors(state: EstimateState, n: int, seed):
    """Draw (phi_error, theta_error) samples from the generative uniform model.

    Y ~ U[y_hat - a, y_hat + a] and Z ~ U[z_hat - b, z_hat + b]; pairs with
    |Z| > sqrt(1 - Y^2) are rejected and the rejection rate returned (a
    warning is issued above 1%).
    """
    rng = _rng(seed)
    kept_y, kept_z = [], []
    accepted = 0
    drawn = 0
    while accepted < n:
        m = max(n - accepted, 1024)
        Y = rng.uniform(state.y_hat - state.a, state.y_hat + state.a, m)
        Z = rng.uniform(state.z_hat - state.b, state.z_hat + state.b, m)
        ok = (np.abs(Y) <= 1.0) & (np.abs(Z) <= np.sqrt(np.clip(1.0 - Y ** 2, 0.0, None)))
        drawn += m
        accepted += int(ok.sum())
        kept_y.append(Y[ok])
        kept_z.append(Z[ok])
    Y = np.concatenate(kept_y)[:n]
    Z = np.concatenate(kept_z)[:n]
    rejection_rate = 1.0 - n / drawn if drawn else 0.0
    if rejection_rate > 0.01:
        warnings.warn(f"generative model rejection rate {rejection_rate:.2%} exceeds 1%")
    phi = np.arcsin(Y)
    theta = np.arccos(Z / np.sqrt(1.0 - Y ** 2))
    return state.phi_hat - phi, state.theta_hat - theta, rejection_rate


def _batched_solve(G, h, weights=None):
    "Per-trial normal-equation solve; weights has shape (trials, rows) or None."
    if weights is None:
        M = np.einsum("tri,trj->tij", G, G)
        r = np.einsum("tri,tr->ti", G, h)
    else:
        M = np.einsum("tri,tr,trj->tij", G, weights, G)
        r = np.einsum("tri,tr,tr->ti", G, weights, h)
    try:
        return np.linalg.solve(M, r[..., None])[..., 0], np.zeros(G.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        out = np.full((G.shape[0], 3), np.nan)
        failed = np.zeros(G.shape[0], dtype=bool)
        for t in range(G.shape[0]):
            try:
                out[t] = np.linalg.solve(M[t], r[t])
            except np.linalg.LinAlgError:
                failed[t] = True
        return out, failed


def run_positioning_experiment(scenario: Scenario, method: str = "wls") -> ExperimentResult:
    """Monte Carlo positioning MSE under per-anchor quantization errors.

    Per trial and anchor the measured direction cosines are drawn uniformly
    within the quantization cell around the truth; variances come from the
    closed forms (with quadrature fallback) and feed the two-pass WLS solver.
    `method="geometry"` stops after the unweighted pass (the baseline) on the
    same error realizations.
    """
    if method not in ("wls", "geometry"):
        raise ValueError(f"unknown method {method!r}")
    anchors = np.asarray(scenario.anchors, dtype=float)
    mu = np.asarray(scenario.mu, dtype=float)
    n_anchor = anchors.shape[0]
    trials = scenario.trials
    a, b = half_widths(scenario.geom, scenario.grid)

    angles = [true_angles(s, mu) for s in anchors]
    y0 = np.array([math.sin(ang.phi) for ang in angles])
    z0 = np.array([math.cos(ang.theta) * math.cos(ang.phi) for ang in angles])

    draws = _rng(scenario.seed).random((trials, n_anchor, 2))
    y = y0[None, :] + (2.0 * draws[..., 0] - 1.0) * a
    z = z0[None, :] + (2.0 * draws[..., 1] - 1.0) * b

    bad = np.abs(y) >= 1.0
    y_c = np.clip(y, -1.0, 1.0)
    phi = np.arcsin(y_c)
    x = np.sqrt(np.clip(1.0 - y_c ** 2, 0.0, None))
    arg = z / np.maximum(x, 1e-300)
    bad |= np.abs(arg) > 1.0 + _CLIP_TOL
    theta = np.arccos(np.clip(arg, -1.0, 1.0))

    var_phi, var_theta = conditional_variances(theta, phi, a, b)

    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    zeros = np.zeros_like(st)
    g_theta = np.stack([-ct, st, zeros], axis=-1)              # (T, I, 3)
    g_phi = np.stack([sp * st, sp * ct, -cp], axis=-1)
    G = np.concatenate([g_theta, g_phi], axis=1)               # (T, 2I, 3)
    h = np.concatenate([(g_theta * anchors).sum(-1), (g_phi * anchors).sum(-1)], axis=1)

    q, failed = _batched_solve(G, h)
    if method == "wls":
        d = np.linalg.norm(q[:, None, :] - anchors[None, :, :], axis=2)
        d = np.maximum(d, 1e-12)
        w_theta = 1.0 / np.maximum((d * cp) ** 2 * var_theta, 1e-300)
        w_phi = 1.0 / np.maximum(d ** 2 * var_phi, 1e-300)
        q, failed2 = _batched_solve(G, h, np.concatenate([w_theta, w_phi], axis=1))
        failed |= failed2

    err2 = ((q - mu) ** 2).sum(axis=1)
    ok = ~(bad.any(axis=1) | failed | ~np.isfinite(err2))
    failure_fraction = 1.0 - ok.mean()
    if failure_fraction > 0.001:
        raise RuntimeError(f"failure fraction {failure_fraction:.2%} exceeds 0.1%")
    return ExperimentResult(mse=float(err2[ok].mean()),
                            failure_fraction=float(failure_fraction),
                            trials=trials)


def sweep(scenario: Scenario, parameter: str, values, method: str = "wls"):
    """One experiment per value of the swept parameter; returns (value, mse) rows.

    Every run reuses the scenario's base seed (common random numbers), which
    keeps a single-value sweep identical to a direct run and sharpens ordinal
    MSE comparisons between values.
    """
    if not values:
        raise ValueError("values must be nonempty")
    rows = []
    for value in values:
        if parameter == "anchor-size":
            geom = ArrayGeometry(n_y=int(value), n_z=int(value),
                                 d_r=scenario.geom.d_r, lambda_c=scenario.geom.lambda_c)
            sc = replace(scenario, geom=geom)
        elif parameter == "anchor-count":
            count = int(value)
            if not 2 <= count <= len(scenario.anchors):
                raise ValueError(f"anchor count {count} outside [2, {len(scenario.anchors)}]")
            sc = replace(scenario, anchors=scenario.anchors[:count])
        elif parameter == "grid-size":
            sc = replace(scenario, grid=SearchGrid(s1=int(value), s2=int(value)))
        else:
            raise ValueError(f"unknown sweep parameter {parameter!r}")
        rows.append((value, run_positioning_experiment(sc, method=method).mse))
    return rows
