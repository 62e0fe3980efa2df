"""Closed-form piecewise PDFs of the angle estimation errors.

With the refined grid of `dft_estimator`, the measured direction cosines are
uniform within one quantization cell: Y = sin(phi) is uniform on
[y_hat - a, y_hat + a] and Z = cos(theta)*cos(phi) uniform on
[z_hat - b, z_hat + b].  Propagating these uniform laws through
phi = arcsin(Y) and theta = arccos(Z / sqrt(1 - Y^2)) yields piecewise
densities for the errors phi_hat - phi and theta_hat - theta, in an exact
form and in a first-order (linearized) form whose moments admit closed
expressions.  Densities are represented as coefficient segments so they can
be serialized and compared without capturing state.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .errors import DegenerateStateError, StateConstructionError

EPS_DEGENERATE = 1e-6
_ARG_TOL = 1e-12


class Case(Enum):
    "Ordering of beta2/alpha2 vs beta1/alpha1; reshapes the cos(theta) density."

    CASE1 = 1
    CASE2 = 2


@dataclass
class EstimateState:
    """One anchor's estimated angles plus the derived quantities.

    a is the sin-domain quantization half-width lambda/(2*n_z*d_r*s2),
    b the coscos-domain half-width lambda/(2*n_y*d_r*s1).
    """

    theta_hat: float
    phi_hat: float
    a: float
    b: float
    x_hat: float = field(init=False)
    y_hat: float = field(init=False)
    u_hat: float = field(init=False)
    v_hat: float = field(init=False)
    z_hat: float = field(init=False)

    def __post_init__(self):
        self.x_hat = math.cos(self.phi_hat)
        self.y_hat = math.sin(self.phi_hat)
        self.u_hat = math.cos(self.theta_hat)
        self.v_hat = math.sin(self.theta_hat)
        self.z_hat = self.u_hat * self.x_hat

    @property
    def alpha1(self) -> float:
        return self.x_hat - (self.y_hat / self.x_hat) * self.a

    @property
    def alpha2(self) -> float:
        return self.x_hat + (self.y_hat / self.x_hat) * self.a

    @property
    def beta1(self) -> float:
        return self.z_hat - self.b

    @property
    def beta2(self) -> float:
        return self.z_hat + self.b

    def _arccos(self, num: float, den: float) -> float:
        ratio = num / den
        if abs(ratio) > 1.0 + _ARG_TOL:
            raise StateConstructionError(f"arccos argument {ratio} out of [-1, 1]")
        return math.acos(min(1.0, max(-1.0, ratio)))

    @property
    def breakpoints(self):
        "(B1, B2, B3, B4): theta_hat minus arccos of the beta/alpha ratios."
        b1 = self.theta_hat - self._arccos(self.beta1, self.alpha2)
        b2 = self.theta_hat - self._arccos(self.beta1, self.alpha1)
        b3 = self.theta_hat - self._arccos(self.beta2, self.alpha2)
        b4 = self.theta_hat - self._arccos(self.beta2, self.alpha1)
        return b1, b2, b3, b4


def half_widths(geom, grid):
    "Quantization half-widths (a, b) of the composite estimate grid."
    a = geom.lambda_c / (2.0 * geom.n_z * geom.d_r * grid.s2)
    b = geom.lambda_c / (2.0 * geom.n_y * geom.d_r * grid.s1)
    return a, b


def require_valid(state: EstimateState) -> None:
    "Raise unless the state lies in the closed-form validity domain."
    if not (0.0 < state.phi_hat < math.pi / 2 and 0.0 < state.theta_hat < math.pi / 2):
        raise DegenerateStateError("closed forms need theta_hat, phi_hat in (0, pi/2)")
    if state.y_hat < EPS_DEGENERATE or state.u_hat < EPS_DEGENERATE:
        raise DegenerateStateError("sin(phi_hat) or cos(theta_hat) below 1e-6")
    if not (state.a > 0 and state.b > 0):
        raise StateConstructionError("half-widths must be positive")
    if state.y_hat + state.a > 1.0:
        raise StateConstructionError("sin-domain cell leaves [-1, 1]")
    if state.alpha1 <= 0.0:
        raise StateConstructionError("alpha1 <= 0: cos(phi) cell too wide")
    if state.beta1 <= 0.0:
        raise StateConstructionError("beta1 <= 0: coscos cell crosses zero")
    state.breakpoints  # noqa: B018 - raises on arccos-domain violation


def build_estimate_state(theta_hat: float, phi_hat: float, geom, grid) -> EstimateState:
    "Construct and validate an estimate state from angles and grid resolution."
    a, b = half_widths(geom, grid)
    state = EstimateState(theta_hat=theta_hat, phi_hat=phi_hat, a=a, b=b)
    require_valid(state)
    return state


def select_case(state: EstimateState) -> Case:
    "Case 1 iff beta2/alpha2 > beta1/alpha1 (ties resolve to Case 1)."
    if state.beta2 * state.alpha1 >= state.beta1 * state.alpha2:
        return Case.CASE1
    return Case.CASE2


# ---------------------------------------------------------------------------
# Piecewise density representation

@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    kind: str
    coef: tuple


@dataclass(frozen=True)
class PiecewisePdf:
    "Ordered disjoint contiguous segments; evaluates to 0 outside the support."

    segments: tuple

    @property
    def support(self):
        return self.segments[0].lo, self.segments[-1].hi


def _eval_uniform(t, c):
    return np.full_like(t, c[0])


def _eval_affine(t, c):
    return c[0] + c[1] * t


def _eval_cos_shift(t, c):
    return c[0] * np.cos(c[1] - t)


def _eval_sin_shift_mix(t, c):
    # sin(theta0 - t) * (c0 + c1 / cos^2(theta0 - t))
    shifted = c[2] - t
    return np.sin(shifted) * (c[0] + c[1] / np.cos(shifted) ** 2)


def _eval_lin_mix(t, c):
    # (v - t*u) * (c0 + c1 / (u + t*v)^2), the linearized analogue
    u, v = c[2], c[3]
    return (v - t * u) * (c[0] + c[1] / (u + t * v) ** 2)


def _eval_inv_mix(t, c):
    return c[0] + c[1] / t ** 2


_EVALUATORS = {
    "uniform": _eval_uniform,
    "affine": _eval_affine,
    "cos_shift": _eval_cos_shift,
    "sin_shift_mix": _eval_sin_shift_mix,
    "lin_mix": _eval_lin_mix,
    "inv_mix": _eval_inv_mix,
}


def pdf_eval(pdf: PiecewisePdf, t: float) -> float:
    "Pointwise density value; zero outside the support."
    if not math.isfinite(t):
        raise ValueError("evaluation point must be finite")
    for seg in pdf.segments:
        if seg.lo <= t <= seg.hi:
            return float(_EVALUATORS[seg.kind](np.float64(t), seg.coef))
    return 0.0


_WEIGHTS = {
    "none": lambda t: 1.0,
    "t": lambda t: t,
    "t2": lambda t: t * t,
}


def pdf_integrate(pdf: PiecewisePdf, lo=None, hi=None, weight="none") -> float:
    "Adaptive quadrature of weight(t)*pdf(t) over [lo, hi] (default: full support)."
    wfun = _WEIGHTS[weight]
    s_lo, s_hi = pdf.support
    lo = s_lo if lo is None else max(lo, s_lo)
    hi = s_hi if hi is None else min(hi, s_hi)
    total = 0.0
    for seg in pdf.segments:
        a = max(lo, seg.lo)
        b = min(hi, seg.hi)
        if a >= b:
            continue
        fun = _EVALUATORS[seg.kind]
        val, _ = integrate.quad(lambda t: wfun(t) * float(fun(np.float64(t), seg.coef)),
                                a, b, epsabs=1e-12, epsrel=1e-11, limit=200)
        total += val
    return total


def to_csv_rows(pdf: PiecewisePdf):
    "Serialize segments as (lo, hi, kind, c0..c3) rows."
    rows = []
    for seg in pdf.segments:
        coef = tuple(seg.coef) + (0.0,) * (4 - len(seg.coef))
        rows.append((seg.lo, seg.hi, seg.kind) + coef)
    return rows


# ---------------------------------------------------------------------------
# Densities

def phi_error_pdf(state: EstimateState, mode: str = "exact") -> PiecewisePdf:
    """Density of phi_hat - arcsin(Y) on a single segment.

    Exact evaluator cos(phi_hat - t)/(2a); linearized
    (cos(phi_hat) + t*sin(phi_hat))/(2a).
    """
    if state.y_hat + state.a > 1.0 or state.y_hat - state.a < -1.0:
        raise StateConstructionError("sin-domain cell leaves [-1, 1]")
    lo = state.phi_hat - math.asin(state.y_hat + state.a)
    hi = state.phi_hat - math.asin(state.y_hat - state.a)
    inv2a = 1.0 / (2.0 * state.a)
    if mode == "exact":
        seg = Segment(lo, hi, "cos_shift", (inv2a, state.phi_hat))
    elif mode == "linear":
        seg = Segment(lo, hi, "affine", (state.x_hat * inv2a, state.y_hat * inv2a))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return PiecewisePdf(segments=(seg,))


def _u_segment_coefs(state: EstimateState):
    "Shared coefficients of the three-segment density of U = Z/X."
    k = state.x_hat / (8.0 * state.a * state.b * state.y_hat)
    outer_lo = (k * state.alpha2 ** 2, -k * state.beta1 ** 2)
    outer_hi = (-k * state.alpha1 ** 2, k * state.beta2 ** 2)
    if select_case(state) is Case.CASE1:
        middle = ("case1", state.x_hat / (2.0 * state.b))
    else:
        middle = ("case2", state.x_hat * state.z_hat / (2.0 * state.a * state.y_hat))
    return outer_lo, middle, outer_hi


def u_pdf(state: EstimateState) -> PiecewisePdf:
    "Density of U = Z/X on [beta1/alpha2, beta2/alpha1] (three segments)."
    require_valid(state)
    outer_lo, (case_tag, mid_c), outer_hi = _u_segment_coefs(state)
    lo = state.beta1 / state.alpha2
    hi = state.beta2 / state.alpha1
    if case_tag == "case1":
        m1, m2 = state.beta1 / state.alpha1, state.beta2 / state.alpha2
        middle = Segment(m1, m2, "uniform", (mid_c,))
    else:
        m1, m2 = state.beta2 / state.alpha2, state.beta1 / state.alpha1
        middle = Segment(m1, m2, "inv_mix", (0.0, mid_c))
    return PiecewisePdf(segments=(
        Segment(lo, m1, "inv_mix", outer_lo),
        middle,
        Segment(m2, hi, "inv_mix", outer_hi),
    ))


def theta_error_pdf(state: EstimateState, mode: str = "exact") -> PiecewisePdf:
    """Density of theta_hat - arccos(U), three segments on [B1, B4].

    Case 1 breakpoint order is B1 <= B2 <= B3 <= B4, Case 2 swaps B2 and B3.
    Exact evaluators carry sin/cos of (theta_hat - t); the linearized ones
    substitute v_hat - t*u_hat and u_hat + t*v_hat.
    """
    require_valid(state)
    if mode not in ("exact", "linear"):
        raise ValueError(f"unknown mode {mode!r}")
    outer_lo, (case_tag, mid_c), outer_hi = _u_segment_coefs(state)
    b1, b2, b3, b4 = state.breakpoints
    if case_tag == "case1":
        order = (b1, b2, b3, b4)
        mid_coef = (mid_c, 0.0)
    else:
        order = (b1, b3, b2, b4)
        mid_coef = (0.0, mid_c)
    if mode == "exact":
        kind = "sin_shift_mix"
        extra = (state.theta_hat,)
    else:
        kind = "lin_mix"
        extra = (state.u_hat, state.v_hat)
    return PiecewisePdf(segments=(
        Segment(order[0], order[1], kind, outer_lo + extra),
        Segment(order[1], order[2], kind, mid_coef + extra),
        Segment(order[2], order[3], kind, outer_hi + extra),
    ))
