"""Exception types shared across the package.

The CLI maps these onto process exit codes: config errors exit 2,
numerical-domain errors exit 3, rank failures exit 4.
"""


class GeometryError(ValueError):
    "Degenerate or invalid spatial configuration (coincident points, bad array)."


class EstimationDomainError(ValueError):
    "An arcsin/arccos argument left [-1, 1] beyond the clamping tolerance."


class StateConstructionError(ValueError):
    "A derived estimate-state quantity violates its domain (arccos argument etc.)."


class DegenerateStateError(StateConstructionError):
    "Estimate state too close to a division-by-zero axis for the closed forms."


class RankError(RuntimeError):
    "Normal equations singular or ill-conditioned beyond the working limit."


class ConfigError(ValueError):
    "Invalid or unknown run configuration."
