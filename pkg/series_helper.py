#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Series helper
Coefficient recurrences and evaluators for the five series used by the solver:

- Lyapunov exponential series near the equilibrium Phi = -a (h_l)
- stable invariant manifold relations rho_1, rho_2 (b_k, c_k)
- far-field algebraic correction v_par(xi) (v_k)
- phase-plane start series near Phi = -a (chi_k)
- phase-plane far-field series theta(x) (theta_k, by formal substitution)
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from mixlayer_types import (
    DivergenceSuspected,
    DomainError,
    MValue,
    TailTooLarge,
)

logger = logging.getLogger(__name__)

LYAPUNOV_HARD_WALL = 1.0
LYAPUNOV_WARN = 0.1
TAIL_SAFETY = 2.0


def _check_order(order: int):
    if int(order) != order or order < 1:
        raise DomainError(f"series order must be a positive integer (got {order})")


def _check_a(a: float):
    if not a > 0:
        raise DomainError("a must be positive")


def _tail_bound(last: float, previous: float) -> float:
    """Geometric bound on the omitted tail given the last two retained terms."""
    last, previous = abs(last), abs(previous)
    if last == 0.0:
        return 0.0
    if previous == 0.0:
        return TAIL_SAFETY * last
    r = min(last / previous, 0.99)
    return TAIL_SAFETY * last * r / (1.0 - r)


# ---------------------------------------------------------------------------
# Lyapunov series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovCoeffs:
    """h[0] holds h_1 (= 1); h[l-1] holds h_l."""

    m: MValue
    a: float
    h: np.ndarray

    @property
    def order(self) -> int:
        return int(self.h.size)


@dataclass(frozen=True)
class SeriesValue:
    phi: float
    dphi: float
    ddphi: float
    tail_estimate: float


def lyapunov_coeffs(m: MValue, a: float, order: int) -> LyapunovCoeffs:
    """
    Coefficients h_1..h_order of Phi = -a + sum h_l d^l exp(l a tau).

    h_l = [sum_{k=1}^{l-1} k((m-1)(l-k)/m - k) h_k h_{l-k}] / [a l^2 (l-1)]
    """
    m = MValue.parse(m)
    _check_a(a)
    _check_order(order)
    h = np.zeros(order)
    h[0] = 1.0
    if m.is_infinite:
        return LyapunovCoeffs(m, float(a), h)
    ratio = m.ratio
    for l in range(2, order + 1):
        total = math.fsum(
            k * (ratio * (l - k) - k) * h[k - 1] * h[l - k - 1] for k in range(1, l)
        )
        h[l - 1] = total / (a * l * l * (l - 1))
    return LyapunovCoeffs(m, float(a), h)


def eval_lyapunov(coeffs: LyapunovCoeffs, d: float, tau: float) -> SeriesValue:
    """
    Partial sums of the Lyapunov series and its term-wise derivatives.

    Args:
        coeffs: output of lyapunov_coeffs
        d: Lyapunov parameter
        tau: evaluation point; |d exp(a tau)| must stay below 1

    Returns:
        SeriesValue(phi, dphi, ddphi, tail_estimate)
    """
    a = coeffs.a
    s = d * math.exp(a * tau) if d != 0 else 0.0
    # m=inf: the single-term series is exact everywhere
    exact = coeffs.m.is_infinite
    if not exact and abs(s) >= LYAPUNOV_HARD_WALL:
        raise DivergenceSuspected(f"|d exp(a tau)| = {abs(s):.3g} >= 1, series not usable")
    if not exact and abs(s) > LYAPUNOV_WARN:
        logger.warning("Lyapunov series evaluated at |d exp(a tau)| = %.3g > %.1f", abs(s), LYAPUNOV_WARN)

    terms = [coeffs.h[l - 1] * s ** l for l in range(1, coeffs.order + 1)]
    phi = -a + math.fsum(terms)
    dphi = math.fsum(l * a * t for l, t in enumerate(terms, start=1))
    ddphi = math.fsum(l * l * a * a * t for l, t in enumerate(terms, start=1))

    nonzero = [t for t in terms if t != 0.0]
    negligible = 1e-15 * max(abs(phi + a), a * 1e-300)
    if len(nonzero) >= 2 and abs(nonzero[-1]) > abs(nonzero[-2]) and abs(nonzero[-1]) > negligible:
        raise DivergenceSuspected(
            f"last Lyapunov term {abs(nonzero[-1]):.3g} exceeds the preceding one "
            f"{abs(nonzero[-2]):.3g} at |d exp(a tau)| = {abs(s):.3g}"
        )
    if len(nonzero) >= 2:
        tail = _tail_bound(nonzero[-1], nonzero[-2])
    elif nonzero and coeffs.order > 1 and not coeffs.m.is_infinite:
        tail = TAIL_SAFETY * abs(nonzero[-1] * s)
    else:
        tail = 0.0
    return SeriesValue(phi, dphi, ddphi, tail)


def lyapunov_tail_integrals(coeffs: LyapunovCoeffs, d: float, tau: float) -> Tuple[float, float]:
    """
    Closed-form integrals from -inf to ``tau`` of (Phi')^2 and s*(Phi')^2.

    Uses Phi' = sum l a h_l d^l exp(l a s).
    """
    a = coeffs.a
    first, second = [], []
    for l in range(1, coeffs.order + 1):
        for k in range(1, coeffs.order + 1):
            amp = l * k * a * a * coeffs.h[l - 1] * coeffs.h[k - 1] * d ** (l + k)
            if amp == 0.0:
                continue
            rate = (l + k) * a
            e = math.exp(rate * tau)
            first.append(amp * e / rate)
            second.append(amp * e * (tau / rate - 1.0 / rate ** 2))
    return math.fsum(first), math.fsum(second)


# ---------------------------------------------------------------------------
# Stable invariant manifold
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimCoeffs:
    """rho_1(y) = sum b_k y^k, rho_2(y) = sum c_k y^k with y = Phi''."""

    m: MValue
    a: float
    b_coef: np.ndarray
    c_coef: np.ndarray

    @property
    def order(self) -> int:
        return int(self.b_coef.size)


def sim_coeffs(m: MValue, a: float, order: int) -> SimCoeffs:
    """Manifold coefficients b_k, c_k up to ``order`` (linear manifold for m=inf)."""
    m = MValue.parse(m)
    _check_a(a)
    _check_order(order)
    b = np.zeros(order)
    c = np.zeros(order)
    b[0] = 1.0 / a ** 2
    c[0] = 1.0 / a
    if m.is_infinite:
        return SimCoeffs(m, float(a), b, c)
    ratio = m.ratio
    for k in range(2, order + 1):
        c_terms, b_terms = [], []
        for l in range(1, k):
            c_terms.append(l * c[l - 1] * b[k - l - 1])
            b_terms.append(l * b[l - 1] * b[k - l - 1])
            for s in range(1, k - l + 1):
                cc = c[s - 1] * c[k - l - s]
                c_terms.append(-ratio * l * c[l - 1] * cc)
                b_terms.append(-ratio * l * b[l - 1] * cc)
        c[k - 1] = math.fsum(c_terms) / (a * k)
        b[k - 1] = (c[k - 1] + math.fsum(b_terms)) / (a * k)
    return SimCoeffs(m, float(a), b, c)


def eval_sim(coeffs: SimCoeffs, y: float, order: int = None) -> Tuple[float, float]:
    """(rho_1(y), rho_2(y)) truncated at ``order`` terms."""
    n = coeffs.order if order is None else order
    powers = [y ** k for k in range(1, n + 1)]
    rho1 = math.fsum(coeffs.b_coef[k] * powers[k] for k in range(n))
    rho2 = math.fsum(coeffs.c_coef[k] * powers[k] for k in range(n))
    return rho1, rho2


def sim_residual(coeffs: SimCoeffs, y: float) -> Tuple[float, float]:
    """
    Residuals of the manifold equations
    rho_1'(y) [a y + (m-1)/m rho_2^2 - rho_1 y] = rho_2 and
    rho_2'(y) [ ... ] = y for the truncated series.
    """
    n = coeffs.order
    rho1, rho2 = eval_sim(coeffs, y)
    d1 = math.fsum(k * coeffs.b_coef[k - 1] * y ** (k - 1) for k in range(1, n + 1))
    d2 = math.fsum(k * coeffs.c_coef[k - 1] * y ** (k - 1) for k in range(1, n + 1))
    flow = coeffs.a * y + coeffs.m.ratio * rho2 * rho2 - rho1 * y
    return d1 * flow - rho2, d2 * flow - y


def sim_transfer_conditions(
    coeffs: SimCoeffs,
    ddphi_at_minus_T: float,
    approx_order: int,
    tail_tol: float = 1e-3,
) -> Tuple[float, float]:
    """
    Boundary data (Phi(-T), Phi'(-T)) on the manifold for a given Phi''(-T).

    Args:
        coeffs: manifold coefficients
        ddphi_at_minus_T: y = Phi''(-T)
        approx_order: number of retained terms (1 = linear, 2 = second order)
        tail_tol: maximum allowed size of the first omitted term

    Returns:
        (Phi(-T), Phi'(-T))
    """
    _check_order(approx_order)
    if approx_order > coeffs.order:
        raise DomainError(f"approx_order {approx_order} exceeds available order {coeffs.order}")
    y = ddphi_at_minus_T
    rho1, rho2 = eval_sim(coeffs, y, approx_order)
    if approx_order < coeffs.order:
        tail = max(abs(coeffs.b_coef[approx_order]), abs(coeffs.c_coef[approx_order])) * abs(y) ** (approx_order + 1)
    else:
        tail = max(abs(coeffs.b_coef[-1]), abs(coeffs.c_coef[-1])) * abs(y) ** (approx_order + 1)
    if tail > tail_tol:
        raise TailTooLarge(f"manifold truncation estimate {tail:.3g} exceeds {tail_tol:.3g} at y={y:.3g}")
    return -coeffs.a + rho1, rho2


# ---------------------------------------------------------------------------
# Far-field correction v_par(xi)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FarfieldCoeffs:
    m: float
    b: float
    v: np.ndarray


def farfield_coeffs(m: float, b: float, order: int) -> FarfieldCoeffs:
    """
    Coefficients of v_par(xi) = sum v_k xi^-k in Phi = tau^m (b + v_par(xi)).

    v_1 = -(m-1)(m-2)/(m+1)^2, higher terms by the nonlinear recurrence.
    """
    m = float(m)
    if not m > 0 or math.isinf(m):
        raise DomainError("far-field series needs finite m > 0")
    if b == 0:
        raise DomainError("far-field series needs b != 0")
    _check_order(order)
    ratio = (m - 1.0) / m
    q = (m + 2.0) / (m + 1.0)
    v = np.zeros(order)
    v[0] = -(m - 1.0) * (m - 2.0) / (m + 1.0) ** 2
    for k in range(1, order):
        linear = (
            k * (k + 1) * (k + 2)
            - 6.0 * m / (m + 1.0) * k * (k + 1)
            + (7.0 * m - 4.0) * m / (m + 1.0) ** 2 * k
            - m * (m - 1.0) * (m - 2.0) / (m + 1.0) ** 3
        ) * v[k - 1]
        nonlinear = math.fsum(
            l * (l + 1 - q - ratio * (k - l + 1)) * v[l - 1] * v[k - l] for l in range(1, k + 1)
        )
        guard = b * (k + 1) * (k + 2 - q)
        if guard == 0:
            raise DomainError("far-field recurrence guard factor vanished")
        v[k] = (linear - nonlinear) / guard
    return FarfieldCoeffs(m, float(b), v)


def eval_farfield(coeffs: FarfieldCoeffs, xi: float) -> Tuple[float, float, float, float]:
    """v and its first three xi-derivatives."""
    ks = np.arange(1, coeffs.v.size + 1, dtype=float)
    p = xi ** (-ks)
    v = float(np.sum(coeffs.v * p))
    dv = float(np.sum(-ks * coeffs.v * p)) / xi
    d2v = float(np.sum(ks * (ks + 1) * coeffs.v * p)) / xi ** 2
    d3v = float(np.sum(-ks * (ks + 1) * (ks + 2) * coeffs.v * p)) / xi ** 3
    return v, dv, d2v, d3v


def farfield_residual(coeffs: FarfieldCoeffs, xi: float) -> float:
    """Residual of the v(xi) equation for the truncated series."""
    m, b = coeffs.m, coeffs.b
    v, dv, d2v, d3v = eval_farfield(coeffs, xi)
    g = m * (m - 1.0) * (m - 2.0) / ((m + 1.0) ** 3 * xi ** 3)
    lhs = (
        d3v
        + (6.0 * m / ((m + 1.0) * xi) + b) * d2v
        + ((7.0 * m - 4.0) * m / ((m + 1.0) ** 2 * xi ** 2) + (m + 2.0) * b / ((m + 1.0) * xi)) * dv
        + g * v
        + g * b
    )
    rhs = -v * d2v - (m + 2.0) / ((m + 1.0) * xi) * v * dv + (m - 1.0) / m * dv * dv
    return lhs - rhs


def farfield_phi(coeffs: FarfieldCoeffs, w: float) -> Tuple[float, float, float]:
    """
    Phi, Phi', Phi'' of w^m (b + v_par(xi)) with w = tau + tau_s, xi = w^(m+1)/(m+1).
    The exponentially small part is neglected.
    """
    m, b = coeffs.m, coeffs.b
    xi = w ** (m + 1.0) / (m + 1.0)
    v, dv, d2v, _ = eval_farfield(coeffs, xi)
    g = b + v
    phi = w ** m * g
    dphi = m * w ** (m - 1.0) * g + w ** (2.0 * m) * dv
    ddphi = m * (m - 1.0) * w ** (m - 2.0) * g + 3.0 * m * w ** (2.0 * m - 1.0) * dv + w ** (3.0 * m) * d2v
    return phi, dphi, ddphi


# ---------------------------------------------------------------------------
# Phase-plane start series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseChiCoeffs:
    m: float
    chi: np.ndarray


def phase_chi_coeffs(m: float, order: int) -> PhaseChiCoeffs:
    """
    chi_1..chi_order of f(Phi) = a(Phi+a)[1 + sum chi_k ((Phi+a)/a)^k].

    chi_k = (k+1)^-2 { -chi_{k-1}[1+m(k-1)]/m - sum_{l=1}^{k-1} [l(k+3)+1] chi_l chi_{k-l} }
    with chi_0 = 1.
    """
    m = float(m)
    if m == 0 or math.isnan(m):
        raise DomainError("phase series needs m != 0")
    _check_order(order)
    chi = np.zeros(order + 1)
    chi[0] = 1.0
    for k in range(1, order + 1):
        factor = (k - 1.0) + (0.0 if math.isinf(m) else 1.0 / m)
        total = math.fsum((l * (k + 3) + 1) * chi[l] * chi[k - l] for l in range(1, k))
        chi[k] = (-chi[k - 1] * factor - total) / (k + 1) ** 2
    return PhaseChiCoeffs(m, chi[1:].copy())


def eval_phase_start(coeffs: PhaseChiCoeffs, a: float, delta: float) -> Tuple[float, float]:
    """f and df/dPhi at Phi = -a + delta from the chi series."""
    t = delta / a
    ks = np.arange(1, coeffs.chi.size + 1, dtype=float)
    series = 1.0 + float(np.sum(coeffs.chi * t ** ks))
    dseries = float(np.sum(ks * coeffs.chi * t ** (ks - 1))) / a
    f = a * delta * series
    df = a * series + a * delta * dseries
    return f, df


# ---------------------------------------------------------------------------
# Phase-plane far-field series theta(x)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaCoeffs:
    m: float
    B: float
    theta: np.ndarray


def _mul(p: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
    """Product of two power series in u = 1/x truncated to degree n."""
    return np.convolve(p, q)[: n + 1]


def _theta_equation_series(theta: np.ndarray, m: float, B: float, n: int) -> np.ndarray:
    """
    Coefficients (in u = 1/x, up to degree n) of
    (1+Z)Z'' + p Z' + (q/x)(1+Z)Z' + Z'^2 + (r/x^2)(1+Z)^2,
    the Z-equation multiplied through by (1+Z).
    """
    p = m / (B * (m + 1.0))
    q = (4.0 * m - 3.0) / (m + 1.0)
    r = (m - 1.0) * (m - 2.0) / (m + 1.0) ** 2

    z = np.zeros(n + 1)
    z[1: theta.size + 1] = theta[: n]
    one_z = z.copy()
    one_z[0] += 1.0

    # d/dx = -u^2 d/du
    dz = np.zeros(n + 1)
    d2z = np.zeros(n + 1)
    for k in range(1, n + 1):
        if k + 1 <= n:
            dz[k + 1] += -k * z[k]
        if k + 2 <= n:
            d2z[k + 2] += k * (k + 1) * z[k]

    shift1 = np.zeros(n + 1)
    shift1[1:] = _mul(one_z, dz, n)[:-1]
    one_z_sq = _mul(one_z, one_z, n)
    shift2 = np.zeros(n + 1)
    shift2[2:] = one_z_sq[:-2]

    return _mul(one_z, d2z, n) + p * dz + q * shift1 + _mul(dz, dz, n) + r * shift2


def theta_coeffs(m: float, B: float, order: int) -> ThetaCoeffs:
    """
    theta_1..theta_order of theta(x) = sum theta_k x^-k by formal substitution.

    The coefficient of u^(k+1) in the Z-equation is linear in theta_k with
    factor -p k (p = m/(B(m+1))); everything else only involves lower terms.
    """
    m = float(m)
    if not m > 0 or math.isinf(m):
        raise DomainError("theta series needs finite m > 0")
    if B == 0:
        raise DomainError("theta series needs B != 0")
    _check_order(order)
    p = m / (B * (m + 1.0))
    n = order + 1
    theta = np.zeros(order)
    for k in range(1, order + 1):
        eq = _theta_equation_series(theta, m, B, n)
        theta[k - 1] = eq[k + 1] / (p * k)
    return ThetaCoeffs(m, float(B), theta)


def eval_theta(coeffs: ThetaCoeffs, x: float) -> Tuple[float, float, float]:
    """theta(x) with its first two x-derivatives."""
    ks = np.arange(1, coeffs.theta.size + 1, dtype=float)
    p = x ** (-ks)
    z = float(np.sum(coeffs.theta * p))
    dz = float(np.sum(-ks * coeffs.theta * p)) / x
    d2z = float(np.sum(ks * (ks + 1) * coeffs.theta * p)) / x ** 2
    return z, dz, d2z


def theta_residual(coeffs: ThetaCoeffs, x: float) -> float:
    """Residual of the Z(x) equation (unmultiplied form) for the truncated series."""
    m, B = coeffs.m, coeffs.B
    z, dz, d2z = eval_theta(coeffs, x)
    p = m / (B * (m + 1.0))
    q = (4.0 * m - 3.0) / (m + 1.0)
    r = (m - 1.0) * (m - 2.0) / (m + 1.0) ** 2
    return (
        d2z
        + dz * (p + q / x)
        + z * r / x ** 2
        + p * dz * (1.0 / (1.0 + z) - 1.0)
        + dz * dz / (1.0 + z)
        + r / x ** 2
    )
