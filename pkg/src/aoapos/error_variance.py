"""Closed-form variances of the angle estimation errors.

The second moments of the linearized error densities reduce to polynomial
antiderivatives plus integrals of the form

    int_0^x t^(m-1) / (1 + beta*t)^2 dt = (x^m / m) * 2F1(2, m; m+1; -beta*x),

evaluated between the support breakpoints.  `variance_phi` and
`variance_theta` implement those closed forms; `variance_numeric` is the
adaptive-quadrature oracle they are validated against.  `conditional_variances`
is the vectorized dispatcher used by the positioning experiments: it applies
the closed forms where they are valid and falls back to Gauss-Legendre
quadrature of the generative uniform model elsewhere, so the solver always
receives finite weights.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .error_pdf import (Case, EPS_DEGENERATE, EstimateState, PiecewisePdf,
                        pdf_integrate, require_valid, select_case)
from .errors import DegenerateStateError, EstimationDomainError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class VarianceTerms:
    "Second-moment pieces d11..d13, first-moment pieces d21..d23, and the variance."

    d11: float
    d12: float
    d13: float
    d21: float
    d22: float
    d23: float
    variance: float
    case: Case


def hyp2f1_term(nu: int, mu: int, beta_coef: float, upper: float) -> float:
    "2F1(nu, mu; mu+1; -beta*upper) for the parameter family the moments use."
    if nu != 2 or mu not in (2, 3, 4):
        raise ValueError("only nu = 2 and mu in {2, 3, 4} are supported")
    if 1.0 + beta_coef * upper <= 0.0:
        raise EstimationDomainError("integrand pole inside [0, upper]")
    return float(special.hyp2f1(2, mu, mu + 1, -beta_coef * upper))


def _int_frac(mu, beta, x):
    "int_0^x t^(mu-1)/(1 + beta*t)^2 dt, vectorized (assumes no pole on the path)."
    return x ** mu / mu * special.hyp2f1(2, mu, mu + 1, -beta * x)


def _poly_piece(n, u, v, x):
    "int_0^x t^n (v - t*u) dt."
    return v * x ** (n + 1) / (n + 1) - u * x ** (n + 2) / (n + 2)


def _frac_piece(n, u, v, x):
    "int_0^x t^n (v - t*u)/(u + t*v)^2 dt."
    beta = v / u
    return (v / u ** 2) * _int_frac(n + 1, beta, x) - (1.0 / u) * _int_frac(n + 2, beta, x)


def _theta_moment_terms(n, th, x, y, u, v, z, a, b, case1):
    """The three integral pieces of E[t^n] of the linearized theta-error pdf.

    All arguments are broadcastable arrays; `case1` is a boolean mask.
    """
    k = x / (8.0 * a * b * y)
    alpha1 = x - (y / x) * a
    alpha2 = x + (y / x) * a
    beta1 = z - b
    beta2 = z + b
    B1 = th - np.arccos(np.clip(beta1 / alpha2, -1.0, 1.0))
    B2 = th - np.arccos(np.clip(beta1 / alpha1, -1.0, 1.0))
    B3 = th - np.arccos(np.clip(beta2 / alpha2, -1.0, 1.0))
    B4 = th - np.arccos(np.clip(beta2 / alpha1, -1.0, 1.0))

    def P(xx):
        return _poly_piece(n, u, v, xx)

    def R(xx):
        return _frac_piece(n, u, v, xx)

    inner_lo = np.where(case1, B2, B3)
    inner_hi = np.where(case1, B3, B2)
    t_lo = k * (alpha2 ** 2 * (P(inner_lo) - P(B1)) - beta1 ** 2 * (R(inner_lo) - R(B1)))
    t_hi = k * (beta2 ** 2 * (R(B4) - R(inner_hi)) - alpha1 ** 2 * (P(B4) - P(inner_hi)))
    mid1 = x / (2.0 * b) * (P(B3) - P(B2))
    mid2 = (x * z / (2.0 * a * y)) * (R(B2) - R(B3))
    t_mid = np.where(case1, mid1, mid2)
    return t_lo, t_mid, t_hi


def _phi_variance_closed(ph, x, y, a):
    "Variance of the linearized phi-error pdf (polynomial antiderivatives)."
    t1 = ph - np.arcsin(y + a)
    t2 = ph - np.arcsin(y - a)
    inv2a = 1.0 / (2.0 * a)

    def F(nn, t):
        return inv2a * (x * t ** (nn + 1) / (nn + 1) + y * t ** (nn + 2) / (nn + 2))

    m1 = F(1, t2) - F(1, t1)
    m2 = F(2, t2) - F(2, t1)
    return m2 - m1 ** 2


def variance_phi(state: EstimateState) -> float:
    "Closed-form variance of the linearized phi-error density."
    require_valid(state)
    return float(_phi_variance_closed(state.phi_hat, state.x_hat, state.y_hat, state.a))


def variance_theta(state: EstimateState) -> VarianceTerms:
    "Closed-form variance of the linearized theta-error density, with its pieces."
    require_valid(state)
    case = select_case(state)
    b1, _, _, b4 = state.breakpoints
    ratio = state.v_hat / state.u_hat
    if max(abs(ratio * b1), abs(ratio * b4)) >= 1.0:
        raise DegenerateStateError("breakpoints outside the hypergeometric series domain")
    args = (np.float64(state.theta_hat), np.float64(state.x_hat), np.float64(state.y_hat),
            np.float64(state.u_hat), np.float64(state.v_hat), np.float64(state.z_hat),
            np.float64(state.a), np.float64(state.b), case is Case.CASE1)
    d21, d22, d23 = (float(t) for t in _theta_moment_terms(1, *args))
    d11, d12, d13 = (float(t) for t in _theta_moment_terms(2, *args))
    variance = (d11 + d12 + d13) - (d21 + d22 + d23) ** 2
    return VarianceTerms(d11=d11, d12=d12, d13=d13, d21=d21, d22=d22, d23=d23,
                         variance=variance, case=case)


def variance_numeric(pdf: PiecewisePdf) -> float:
    "Quadrature oracle: int t^2 pdf - (int t pdf)^2 over the support."
    m1 = pdf_integrate(pdf, weight="t")
    m2 = pdf_integrate(pdf, weight="t2")
    return m2 - m1 * m1


# ---------------------------------------------------------------------------
# Vectorized dispatch with quadrature fallback (generative uniform model)

def _phi_variance_quad(ph, y, a):
    "Gauss-Legendre variance of phi_hat - arcsin(Y), Y uniform on [y-a, y+a]."
    Y = np.clip(y[:, None] + a * _GL_NODES[None, :], -1.0, 1.0)
    t = ph[:, None] - np.arcsin(Y)
    w = _GL_WEIGHTS / 2.0
    m1 = t @ w
    m2 = (t * t) @ w
    return m2 - m1 ** 2


def _theta_variance_quad(th, y, z, a, b):
    "Gauss-Legendre variance of theta_hat - arccos(Z/X) over the uniform cell."
    Y = y[:, None, None] + a * _GL_NODES[None, :, None]
    Z = z[:, None, None] + b * _GL_NODES[None, None, :]
    X = np.sqrt(np.clip(1.0 - Y ** 2, 0.0, None))
    arg = Z / np.maximum(X, 1e-300)
    ok = np.abs(arg) <= 1.0
    t = th[:, None, None] - np.arccos(np.clip(arg, -1.0, 1.0))
    w2 = np.outer(_GL_WEIGHTS, _GL_WEIGHTS)[None, :, :] / 4.0 * ok
    norm = w2.sum(axis=(1, 2))
    m1 = (w2 * t).sum(axis=(1, 2)) / norm
    m2 = (w2 * t * t).sum(axis=(1, 2)) / norm
    return m2 - m1 ** 2


def conditional_variances(theta_hat, phi_hat, a, b):
    """Per-estimate variances (var_phi, var_theta) for arbitrary valid angles.

    Canonicalizes by the mirror symmetries Y -> -Y and (Z -> -Z,
    theta -> pi - theta), under which both error laws are invariant, then uses
    the closed forms where their assumptions hold and quadrature elsewhere.
    """
    th = np.asarray(theta_hat, dtype=float).ravel()
    ph = np.asarray(phi_hat, dtype=float).ravel()
    x = np.cos(ph)
    y = np.abs(np.sin(ph))
    z = np.abs(np.cos(th)) * x
    u = np.minimum(z / np.maximum(x, 1e-300), 1.0)
    v = np.sqrt(1.0 - u ** 2)
    th_c = np.arccos(u)
    ph_c = np.arcsin(np.minimum(y, 1.0))

    var_phi = np.empty_like(y)
    phi_ok = (y + a <= 1.0) & (y - a >= -1.0)
    var_phi[phi_ok] = _phi_variance_closed(ph_c[phi_ok], x[phi_ok], y[phi_ok], a)
    if not phi_ok.all():
        bad = ~phi_ok
        var_phi[bad] = _phi_variance_quad(ph_c[bad], y[bad], a)

    with np.errstate(all="ignore"):
        alpha1 = x - (y / np.maximum(x, 1e-300)) * a
        alpha2 = x + (y / np.maximum(x, 1e-300)) * a
        beta1 = z - b
        beta2 = z + b
        theta_ok = ((y >= EPS_DEGENERATE) & (u >= EPS_DEGENERATE)
                    & (y + a <= 1.0) & (alpha1 > 0.0) & (beta1 > 0.0)
                    & (beta2 <= alpha1))
        B1 = th_c - np.arccos(np.clip(beta1 / alpha2, -1.0, 1.0))
        B4 = th_c - np.arccos(np.clip(beta2 / np.maximum(alpha1, 1e-300), -1.0, 1.0))
        ratio = v / np.maximum(u, 1e-300)
        theta_ok &= (np.abs(ratio * B1) < 1.0) & (np.abs(ratio * B4) < 1.0)

    var_theta = np.empty_like(y)
    sel = theta_ok
    if sel.any():
        case1 = beta2[sel] * alpha1[sel] >= beta1[sel] * alpha2[sel]
        terms1 = _theta_moment_terms(
            1, th_c[sel], x[sel], y[sel], u[sel], v[sel], z[sel], a, b, case1)
        terms2 = _theta_moment_terms(
            2, th_c[sel], x[sel], y[sel], u[sel], v[sel], z[sel], a, b, case1)
        m1 = sum(terms1)
        m2 = sum(terms2)
        var_theta[sel] = m2 - m1 ** 2
    if not sel.all():
        bad = ~sel
        var_theta[bad] = _theta_variance_quad(th_c[bad], y[bad], z[bad], a, b)

    shape = np.shape(theta_hat)
    return var_phi.reshape(shape), var_theta.reshape(shape)
