#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Blow-up helper
Local structure of solutions near a simple pole, Phi = 6m/((m+1)(tau-tau_p)) (1 + Y),
and the exact Bernoulli-number series of Y for m = 1/2.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import bernoulli, factorial

from mixlayer_types import DomainError, OutOfWindow, OutsideLocalRadius, Undefined

logger = logging.getLogger(__name__)

# positive root of 23 m^2 + 34 m - 25
M1_CONST = (-17.0 + 12.0 * math.sqrt(6.0)) / 23.0
DOUBLE_ROOT_TOL = 1e-9
RESONANCE_TOL = 1e-9
MAX_BERNOULLI_ORDER = 20
LAMBDA3 = -1.0


class PoleRegime(enum.Enum):
    COMPLEX_PAIR = "ComplexPair"   # m > m1
    DOUBLE_ROOT = "DoubleRoot"     # m = m1
    REAL_PAIR = "RealPair"         # 0 < m < m1


@dataclass(frozen=True)
class PoleLocalForm:
    m: float
    regime: PoleRegime
    alpha: float
    beta: Optional[float]
    lambda1: Optional[float]
    lambda2: Optional[float]
    kappa: float
    m1_const: float = M1_CONST
    lambda3: float = LAMBDA3
    resonant: bool = False

    def to_dict(self) -> Dict:
        return {
            'm': self.m,
            'regime': self.regime.value,
            'alpha': self.alpha,
            'beta': self.beta,
            'lambda1': self.lambda1,
            'lambda2': self.lambda2,
            'lambda3': self.lambda3,
            'kappa': self.kappa,
            'm1_const': self.m1_const,
            'resonant': self.resonant,
        }


def kappa(m: float) -> float:
    return 23.0 * m * m + 34.0 * m - 25.0


def cubic(m: float, lam: complex) -> complex:
    """lam^3 - 6 lam^2/(m+1) + lam (5m-1)/(m+1) + 6."""
    return lam ** 3 - 6.0 * lam ** 2 / (m + 1.0) + lam * (5.0 * m - 1.0) / (m + 1.0) + 6.0


def pole_local_form(m: float) -> PoleLocalForm:
    """
    Exponents of the two-parameter blow-up family at a pole for a given m > 0.

    Returns:
        PoleLocalForm: ComplexPair with alpha +- i beta for m > m1, DoubleRoot at m1,
        RealPair lambda1 > lambda2 > 0 below m1 (with a resonance flag when
        lambda1 is an integer multiple of lambda2).
    """
    m = float(m)
    if not m > 0 or math.isinf(m):
        raise DomainError("pole_local_form needs finite m > 0")
    k = kappa(m)
    alpha = (m + 7.0) / (2.0 * (m + 1.0))
    if abs(m - M1_CONST) <= DOUBLE_ROOT_TOL:
        return PoleLocalForm(m, PoleRegime.DOUBLE_ROOT, alpha, None, alpha, alpha, k)
    if k > 0:
        beta = math.sqrt(k) / (2.0 * (m + 1.0))
        return PoleLocalForm(m, PoleRegime.COMPLEX_PAIR, alpha, beta, None, None, k)
    half = math.sqrt(-k) / (2.0 * (m + 1.0))
    lam1, lam2 = alpha + half, alpha - half
    ratio = lam1 / lam2
    resonant = round(ratio) >= 2 and abs(ratio - round(ratio)) < RESONANCE_TOL
    if resonant:
        logger.warning("m=%g: lambda1/lambda2 = %d, the principal term may need logarithmic corrections",
                       m, round(ratio))
    return PoleLocalForm(m, PoleRegime.REAL_PAIR, alpha, None, lam1, lam2, k, resonant=resonant)


def default_local_radius(m: float, factor: float = 0.3) -> float:
    """Heuristic radius factor * sqrt(6m/(m+1)) around the pole."""
    return factor * math.sqrt(6.0 * m / (m + 1.0))


# ---------------------------------------------------------------------------
# m = 1/2 Bernoulli series
# ---------------------------------------------------------------------------

def bernoulli_d(order: int) -> np.ndarray:
    """D_1..D_order with D_n = (-1)^(n-1) 3^n 4^n |B_2n| / (2n)!; D_1 = 1, D_2 = -1/5."""
    if not 1 <= order <= MAX_BERNOULLI_ORDER:
        raise DomainError(f"order must lie in [1, {MAX_BERNOULLI_ORDER}]")
    numbers = bernoulli(2 * order)
    n = np.arange(1, order + 1)
    # B_2n alternates in sign, so B_2n = (-1)^(n-1) |B_2n|
    return numbers[2 * n] * 12.0 ** n / factorial(2 * n, exact=False)


def _y12_terms(c2: float, x: float, order: int) -> Tuple[float, float, float]:
    """Y, dY/dx, d2Y/dx2 of sum D_n (c2 x^2)^n."""
    if 12.0 * abs(c2) * x * x >= math.pi ** 2:
        raise OutOfWindow(f"(a x)^2 = {12.0 * abs(c2) * x * x:.4g} outside the window (a x)^2 < pi^2")
    D = bernoulli_d(order)
    n = np.arange(1, order + 1, dtype=float)
    coef = D * c2 ** n
    y = float(np.sum(coef * x ** (2 * n)))
    dy = float(np.sum(2 * n * coef * x ** (2 * n - 1)))
    d2y = float(np.sum(2 * n * (2 * n - 1) * coef * x ** (2 * n - 2)))
    return y, dy, d2y


def bernoulli_series_y12(a: float, x: float, order: int = MAX_BERNOULLI_ORDER) -> float:
    """
    Y_1/2(x, a) = sum_{n=1}^{order} D_n (C2 x^2)^n with C2 = a^2/12, which sums
    to (ax/2) coth(ax/2) - 1 for (a x)^2 < pi^2.
    """
    return _y12_terms(a * a / 12.0, float(x), order)[0]


# ---------------------------------------------------------------------------
# Principal approximation near the pole
# ---------------------------------------------------------------------------

def _principal_y(form: PoleLocalForm, C1: float, C2: float, x: float) -> Tuple[float, float, float]:
    """Y, Y', Y'' in x = |tau - tau_p| > 0 for the principal term of the family."""
    L = math.log(x)
    if form.regime is PoleRegime.COMPLEX_PAIR:
        al, be = form.alpha, form.beta
        c, s = math.cos(be * L), math.sin(be * L)
        P, Q = al * C1 + be * C2, al * C2 - be * C1
        y = x ** al * (C1 * c + C2 * s)
        dy = x ** (al - 1.0) * (P * c + Q * s)
        d2y = x ** (al - 2.0) * (((al - 1.0) * P + be * Q) * c + ((al - 1.0) * Q - be * P) * s)
        return y, dy, d2y
    if form.regime is PoleRegime.DOUBLE_ROOT:
        al = form.alpha
        P, Q = al * C1 + C2, al * C2
        y = x ** al * (C1 + C2 * L)
        dy = x ** (al - 1.0) * (P + Q * L)
        d2y = x ** (al - 2.0) * ((al - 1.0) * P + Q + (al - 1.0) * Q * L)
        return y, dy, d2y
    l1, l2 = form.lambda1, form.lambda2
    y = C1 * x ** l1 + C2 * x ** l2
    dy = C1 * l1 * x ** (l1 - 1.0) + C2 * l2 * x ** (l2 - 1.0)
    d2y = C1 * l1 * (l1 - 1.0) * x ** (l1 - 2.0) + C2 * l2 * (l2 - 1.0) * x ** (l2 - 2.0)
    return y, dy, d2y


def blowup_local_state(m: float, tau_p: float, C1: float, C2: float, tau: float,
                       radius: Optional[float] = None) -> Tuple[float, float, float]:
    """
    (Phi, Phi', Phi'') of the blow-up family 6m/((m+1) w) (1 + Y(|w|)), w = tau - tau_p.

    For m = 1/2 with C1 = 0 the full Bernoulli series is used (exact coth family);
    otherwise only the principal term of Y.

    Raises:
        Undefined at tau = tau_p, OutsideLocalRadius beyond ``radius``.
    """
    m = float(m)
    form = pole_local_form(m)
    w = float(tau) - float(tau_p)
    if w == 0.0:
        raise Undefined(f"blow-up solution is undefined at its pole tau_p={tau_p:.9g}")
    radius = default_local_radius(m) if radius is None else radius
    x = abs(w)
    if x > radius:
        raise OutsideLocalRadius(f"|tau - tau_p| = {x:.4g} exceeds the local radius {radius:.4g}")

    if m == 0.5 and C1 == 0.0:
        y, dy, d2y = _y12_terms(C2, x, MAX_BERNOULLI_ORDER)
    else:
        y, dy, d2y = _principal_y(form, C1, C2, x)

    K = 6.0 * m / (m + 1.0)
    sgn = 1.0 if w > 0 else -1.0
    # chain rule: d/dtau = sgn d/dx
    ydt, y2dt = sgn * dy, d2y
    phi = K / w * (1.0 + y)
    dphi = -K / w ** 2 * (1.0 + y) + K / w * ydt
    ddphi = 2.0 * K / w ** 3 * (1.0 + y) - 2.0 * K / w ** 2 * ydt + K / w * y2dt
    return phi, dphi, ddphi


def blowup_local_eval(m: float, tau_p: float, C1: float, C2: float, tau: float,
                      radius: Optional[float] = None) -> float:
    """Phi of the blow-up family near tau_p (see blowup_local_state)."""
    return blowup_local_state(m, tau_p, C1, C2, tau, radius)[0]
