"""Command-line front end: JSON config in, CSV tables out.

Subcommands: pdf, variance, locate, sweep, estimate.  Flags override config
file values; unknown config keys are rejected.  Exit codes: 0 success,
2 config error, 3 numerical-domain error, 4 rank failure.  All numbers are
written with 17 significant digits so reruns are byte-identical.
"""

import argparse
import csv
import json
import math
import sys

import numpy as np

from .array_model import AnglePair, ArrayGeometry, true_angles
from .dft_estimator import SearchGrid, estimate
from .error_pdf import build_estimate_state, pdf_integrate, phi_error_pdf, theta_error_pdf
from .error_variance import variance_phi, variance_theta
from .errors import (ConfigError, DegenerateStateError, EstimationDomainError,
                     GeometryError, RankError, StateConstructionError)
from .montecarlo import Scenario, run_positioning_experiment, sample_conditional_errors, sweep
from .wls_positioner import PositioningProblem, locate

DEFAULT_ANCHORS = ((2.0, 20.0, 3.0), (-12.0, -16.0, 58.0),
                   (-10.0, -6.0, -8.0), (10.0, 6.0, -20.0))
DEFAULT_MU = (15.0, 4.0, 5.0)
DEFAULT_LAMBDA = 0.0107
DEFAULT_TRIALS = 10_000
DEFAULT_SEED = 20240817

_COMMON_KEYS = {"n", "s", "d_r_over_lambda", "lambda_c", "seed", "out"}
_ALLOWED_KEYS = {
    "pdf": _COMMON_KEYS | {"phi_hat", "theta_hat", "samples", "bins", "angle"},
    "variance": _COMMON_KEYS | {"phi_hat", "theta_hat", "sizes", "samples"},
    "locate": _COMMON_KEYS | {"anchors", "mu", "trials", "method"},
    "sweep": _COMMON_KEYS | {"anchors", "mu", "trials", "method", "parameter", "values"},
    "estimate": _COMMON_KEYS | {"theta", "phi"},
}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _load_config(path, command):
    if path is None:
        return {}
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _ALLOWED_KEYS[command]
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _merged(args, command):
    "Defaults < config file < explicit flags."
    cfg = dict(_load_config(args.config, command))
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None:
            cfg[key] = value
    return cfg


def _geometry(cfg) -> ArrayGeometry:
    n = int(cfg.get("n", 16))
    lam = float(cfg.get("lambda_c", DEFAULT_LAMBDA))
    ratio = float(cfg.get("d_r_over_lambda", 0.5))
    if n < 1 or lam <= 0 or not 0 < ratio <= 0.5:
        raise ConfigError("invalid geometry parameters")
    return ArrayGeometry(n_y=n, n_z=n, d_r=ratio * lam, lambda_c=lam)


def _grid(cfg) -> SearchGrid:
    s = int(cfg.get("s", 64))
    if s < 1:
        raise ConfigError("grid size must be >= 1")
    return SearchGrid(s1=s, s2=s)


def _scenario(cfg) -> Scenario:
    anchors = cfg.get("anchors", DEFAULT_ANCHORS)
    mu = cfg.get("mu", DEFAULT_MU)
    trials = int(cfg.get("trials", DEFAULT_TRIALS))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    try:
        return Scenario(anchors=tuple(tuple(s) for s in anchors), mu=tuple(mu),
                        geom=_geometry(cfg), grid=_grid(cfg),
                        trials=trials, seed=int(cfg.get("seed", DEFAULT_SEED)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (GeometryError, ConfigError)):
            raise
        raise ConfigError(f"invalid scenario: {exc}") from exc


def _write_csv(path, header, rows):
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else _fmt(cell) for cell in row])
    finally:
        if path:
            out.close()


def cmd_pdf(cfg) -> int:
    samples = int(cfg.get("samples", 1_000_000))
    bins = int(cfg.get("bins", 100))
    angle = cfg.get("angle", "theta")
    if samples < 1 or bins < 1 or angle not in ("theta", "phi"):
        raise ConfigError("samples and bins must be >= 1; angle must be theta or phi")
    state = build_estimate_state(float(cfg.get("theta_hat", math.pi / 3)),
                                 float(cfg.get("phi_hat", math.pi / 6)),
                                 _geometry(cfg), _grid(cfg))
    exact = (theta_error_pdf if angle == "theta" else phi_error_pdf)(state, "exact")
    linear = (theta_error_pdf if angle == "theta" else phi_error_pdf)(state, "linear")
    phi_err, theta_err, _ = sample_conditional_errors(
        state, samples, int(cfg.get("seed", DEFAULT_SEED)))
    data = theta_err if angle == "theta" else phi_err
    lo, hi = exact.support
    counts, edges = np.histogram(data, bins=bins, range=(lo, hi))
    width = edges[1] - edges[0]
    rows = []
    for i in range(bins):
        center = 0.5 * (edges[i] + edges[i + 1])
        rows.append((center,
                     pdf_integrate(exact, edges[i], edges[i + 1]) / width,
                     pdf_integrate(linear, edges[i], edges[i + 1]) / width,
                     counts[i] / (samples * width)))
    _write_csv(cfg.get("out"), ["t", "analytic_exact", "analytic_linear", "empirical"], rows)
    return 0


def cmd_variance(cfg) -> int:
    sizes = cfg.get("sizes", (4, 8, 16, 32))
    if isinstance(sizes, str):
        sizes = [int(v) for v in sizes.split(",")]
    samples = int(cfg.get("samples", 200_000))
    if samples < 2 or not sizes:
        raise ConfigError("need samples >= 2 and at least one size")
    theta_hat = float(cfg.get("theta_hat", math.pi / 3))
    phi_hat = float(cfg.get("phi_hat", math.pi / 6))
    seed = int(cfg.get("seed", DEFAULT_SEED))
    rows = []
    for size in sizes:
        local = dict(cfg)
        local["n"] = int(size)
        state = build_estimate_state(theta_hat, phi_hat, _geometry(local), _grid(cfg))
        phi_err, theta_err, _ = sample_conditional_errors(state, samples, seed)
        rows.append((int(size),
                     variance_theta(state).variance, float(np.var(theta_err)),
                     variance_phi(state), float(np.var(phi_err))))
    _write_csv(cfg.get("out"), ["anchor_size", "var_theta_closed", "var_theta_mc",
                                "var_phi_closed", "var_phi_mc"], rows)
    return 0


def _noiseless_report(scenario: Scenario):
    angles = [true_angles(s, scenario.mu) for s in scenario.anchors]
    problem = PositioningProblem(
        anchors=np.asarray(scenario.anchors),
        theta_hats=[ang.theta for ang in angles],
        phi_hats=[ang.phi for ang in angles],
        sigma2_theta=np.zeros(len(angles)),
        sigma2_phi=np.zeros(len(angles)))
    est = locate(problem)
    print("position," + ",".join(_fmt(c) for c in est.q_hat))


def cmd_locate(cfg) -> int:
    scenario = _scenario(cfg)
    method = cfg.get("method", "wls")
    if method not in ("wls", "geometry"):
        raise ConfigError("method must be wls or geometry")
    _noiseless_report(scenario)
    result = run_positioning_experiment(scenario, method=method)
    _write_csv(cfg.get("out"), ["value", "mse", "failure_fraction"],
               [(scenario.geom.n_y, result.mse, result.failure_fraction)])
    return 0


def cmd_sweep(cfg) -> int:
    scenario = _scenario(cfg)
    parameter = cfg.get("parameter", "anchor-size")
    values = cfg.get("values", (4, 8, 16, 32) if parameter == "anchor-size" else None)
    if isinstance(values, str):
        values = [int(v) for v in values.split(",")]
    if parameter not in ("anchor-size", "anchor-count", "grid-size"):
        raise ConfigError("parameter must be anchor-size, anchor-count or grid-size")
    if not values:
        raise ConfigError("values must be nonempty")
    method = cfg.get("method", "wls")
    if method not in ("wls", "geometry"):
        raise ConfigError("method must be wls or geometry")
    _noiseless_report(scenario)
    try:
        rows = sweep(scenario, parameter, [int(v) for v in values], method=method)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write_csv(cfg.get("out"), ["value", "mse"], rows)
    return 0


def cmd_estimate(cfg) -> int:
    try:
        angles = AnglePair(theta=float(cfg.get("theta", math.pi / 3)),
                           phi=float(cfg.get("phi", math.pi / 6)))
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc
    geom, grid = _geometry(cfg), _grid(cfg)
    state = estimate(angles, geom, grid)
    sin_err = math.sin(state.phi_hat) - math.sin(angles.phi)
    coscos_err = (math.cos(state.theta_hat) * math.cos(state.phi_hat)
                  - math.cos(angles.theta) * math.cos(angles.phi))
    _write_csv(cfg.get("out"),
               ["theta", "phi", "theta_hat", "phi_hat", "sin_phi_error", "coscos_error"],
               [(angles.theta, angles.phi, state.theta_hat, state.phi_hat,
                 sin_err, coscos_err)])
    return 0


_COMMANDS = {
    "pdf": cmd_pdf,
    "variance": cmd_variance,
    "locate": cmd_locate,
    "sweep": cmd_sweep,
    "estimate": cmd_estimate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoapos",
                                     description="AoA estimation-error analysis "
                                                 "and positioning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--n", type=int, help="antennas per axis")
        p.add_argument("--s", type=int, help="rotation grid points per axis")
        p.add_argument("--d-r-over-lambda", dest="d_r_over_lambda", type=float)
        p.add_argument("--lambda-c", dest="lambda_c", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output CSV path (default stdout)")

    p = sub.add_parser("pdf", help="error-density table (analytic vs empirical)")
    common(p)
    p.add_argument("--phi-hat", dest="phi_hat", type=float)
    p.add_argument("--theta-hat", dest="theta_hat", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--angle", choices=["theta", "phi"])

    p = sub.add_parser("variance", help="variance vs anchor size table")
    common(p)
    p.add_argument("--phi-hat", dest="phi_hat", type=float)
    p.add_argument("--theta-hat", dest="theta_hat", type=float)
    p.add_argument("--sizes", help="comma-separated anchor sizes")
    p.add_argument("--samples", type=int)

    p = sub.add_parser("locate", help="single positioning experiment")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--method", choices=["wls", "geometry"])

    p = sub.add_parser("sweep", help="MSE sweep over a scenario parameter")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--method", choices=["wls", "geometry"])
    p.add_argument("--parameter", choices=["anchor-size", "anchor-count", "grid-size"])
    p.add_argument("--values", help="comma-separated sweep values")

    p = sub.add_parser("estimate", help="run the DFT estimator on one angle pair")
    common(p)
    p.add_argument("--theta", type=float)
    p.add_argument("--phi", type=float)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merged(args, args.command)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateStateError, StateConstructionError, EstimationDomainError,
            GeometryError) as exc:
        print(f"numerical-domain error: {exc}", file=sys.stderr)
        return 3
    except RankError as exc:
        print(f"rank error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
