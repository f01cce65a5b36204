#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Exact solutions
Closed-form regular and blow-up solutions of the similarity ODE, their Lyapunov
parameters, and the three physical preset flows (flooded jet m=1/2, separation
limit m=inf, near-wall jet m=1/3) built from them.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import optimize

from ode_integrator import pole_amplitude
from mixlayer_types import (
    DomainError,
    MValue,
    NoManifoldForm,
    OutOfDomain,
    Undefined,
)

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
# tau_p * a for the BVP-normalized m=1/3 solution
POLE_13 = 2.0 * math.pi * SQRT3 / 3.0
# shift between the m=1/3 family parameter tau_s and the BVP normalization
SHIFT_13 = SQRT3 * math.pi / 6.0
FAR_Y = 70.0


class ExactKind(enum.Enum):
    TANH = "Tanh"                 # m = 1/2
    LINEAR = "Linear"             # m = 1
    QUADRATIC = "Quadratic"       # m = 2
    EXPONENTIAL = "Exponential"   # m = inf
    IMPLICIT_13 = "Implicit13"    # m = 1/3
    BLOWUP_POLE = "BlowupPole"    # any m
    BLOWUP_COTH = "BlowupCoth"    # m = 1/2


_FIXED_M = {
    ExactKind.TANH: MValue.finite(0.5),
    ExactKind.LINEAR: MValue.finite(1.0),
    ExactKind.QUADRATIC: MValue.finite(2.0),
    ExactKind.EXPONENTIAL: MValue.infinite(),
    ExactKind.IMPLICIT_13: MValue.finite(1.0 / 3.0),
    ExactKind.BLOWUP_COTH: MValue.finite(0.5),
}


@dataclass(frozen=True)
class ExactSolution:
    """
    One member of an exact family.

    ``shift`` is tau_s for regular kinds and tau_p for blow-up kinds. For
    IMPLICIT_13 shift=0 is the BVP normalization Phi(0)=0. ``m`` is only read
    for BLOWUP_POLE.
    """

    kind: ExactKind
    a: float = 1.0
    shift: float = 0.0
    m_value: Optional[MValue] = None

    def __post_init__(self):
        if self.kind is ExactKind.BLOWUP_POLE:
            if self.m_value is None:
                raise DomainError("BlowupPole needs m")
            m = MValue.parse(self.m_value)
            object.__setattr__(self, 'm_value', m)
        elif self.kind in (ExactKind.TANH, ExactKind.EXPONENTIAL, ExactKind.IMPLICIT_13):
            if not self.a > 0:
                raise DomainError("a must be positive")
        elif self.a == 0 and self.kind is not ExactKind.BLOWUP_COTH:
            raise DomainError("a must be nonzero")

    @property
    def m(self) -> MValue:
        if self.kind is ExactKind.BLOWUP_POLE:
            return self.m_value
        return _FIXED_M[self.kind]

    @property
    def pole(self) -> Optional[float]:
        """Pole location, or None for kinds that are regular on the real line."""
        if self.kind in (ExactKind.BLOWUP_POLE, ExactKind.BLOWUP_COTH):
            return self.shift
        if self.kind is ExactKind.IMPLICIT_13:
            return self.shift + POLE_13 / self.a
        return None


# ---------------------------------------------------------------------------
# m = 1/3 implicit solution
# ---------------------------------------------------------------------------

def _log_ratio(a: float, u: float, e: float) -> float:
    """ln((a + sqrt(a) sigma + sigma^2) / (sqrt(a) - sigma)^2) with e = sqrt(a) - sigma = exp(u)."""
    ra = math.sqrt(a)
    if e > ra:
        return math.log1p(3.0 * a / (e * e) - 3.0 * ra / e)
    return math.log(3.0 * a - 3.0 * ra * e + e * e) - 2.0 * u


def _tau_of_u(a: float, u: float) -> float:
    """
    tau(Phi) for the BVP-normalized m=1/3 solution, written in u = ln(sqrt(a) - sigma)
    where sigma = +sqrt(-Phi) for tau <= 0 and -sqrt(-Phi) for tau > 0.
    """
    ra = math.sqrt(a)
    e = math.exp(u)
    return (
        SHIFT_13 / a
        - _log_ratio(a, u, e) / (2.0 * a)
        - SQRT3 / a * math.atan((3.0 * ra - 2.0 * e) / math.sqrt(3.0 * a))
    )


def _root_13(a: float, tau: float) -> Tuple[float, float]:
    """(sigma, sqrt(a) - sigma) at tau; the second entry keeps the e^{a tau} tail."""
    if not a > 0:
        raise DomainError("a must be positive")
    tau_p = POLE_13 / a
    if tau >= tau_p:
        raise OutOfDomain(f"tau={tau} is not left of the pole tau_p={tau_p:.9g}")
    ra = math.sqrt(a)
    if tau == 0.0:
        return 0.0, ra

    # u runs over the real line while tau runs over (-inf, tau_p)
    def g(u):
        return _tau_of_u(a, u) - tau

    lo, hi = math.log(ra) - 1.0, math.log(ra) + 1.0
    while g(lo) > 0:
        lo -= 4.0 + abs(lo)
        if lo < -1e6:
            raise OutOfDomain(f"tau={tau} too far left for the implicit m=1/3 relation")
    while g(hi) < 0:
        hi += 4.0
        if hi > 700:
            raise OutOfDomain(f"tau={tau} too close to the pole tau_p={tau_p:.9g}")
    u = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    e = math.exp(u)
    return ra - e, e


def eval_implicit_13(a: float, tau: float) -> float:
    """
    Phi_{1/3}(tau, a) with Phi(0)=0, from the implicit tau(Phi) relation.

    The relation is strictly monotone, so a bracketed hybrid root finder on
    ln(sqrt(a) - sigma) converges on both branches (tau <= 0 and 0 < tau < tau_p).
    """
    return _state_13(a, float(tau))[0]


def _state_13(a: float, tau: float) -> Tuple[float, float, float]:
    sigma, e = _root_13(a, tau)
    ra = math.sqrt(a)
    # a^(3/2) - sigma^3 = e (3a - 3 sqrt(a) e + e^2)
    gap = e * (3.0 * a - 3.0 * ra * e + e * e)
    phi = -a + e * (2.0 * ra - e)
    dphi = 2.0 / 3.0 * sigma * gap
    ddphi = -2.0 / 9.0 * (a ** 1.5 - 4.0 * sigma ** 3) * gap
    return phi, dphi, ddphi


def d_one_third(a: float, tau_s: float = 0.0) -> float:
    """Lyapunov parameter of the m=1/3 family: 2 sqrt(3) a exp(sqrt(3) pi/3 - a tau_s)."""
    if not a > 0:
        raise DomainError("a must be positive")
    return 2.0 * SQRT3 * a * math.exp(SQRT3 * math.pi / 3.0 - a * tau_s)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_exact(sol: ExactSolution, tau: float) -> Tuple[float, float, float]:
    """
    (Phi, Phi', Phi'') of an exact solution at ``tau``.

    Raises Undefined at a pole and OutOfDomain right of the m=1/3 pole.
    """
    a = sol.a
    w = float(tau) - sol.shift
    kind = sol.kind

    if kind is ExactKind.TANH:
        t = math.tanh(a * w / 2.0)
        sech2 = 1.0 - t * t
        return a * t, a * a / 2.0 * sech2, -a ** 3 / 2.0 * sech2 * t
    if kind is ExactKind.LINEAR:
        return a * w, a, 0.0
    if kind is ExactKind.QUADRATIC:
        return a * w * w, 2.0 * a * w, 2.0 * a
    if kind is ExactKind.EXPONENTIAL:
        e = math.exp(a * w)
        return a * (e - 1.0), a * a * e, a ** 3 * e
    if kind is ExactKind.IMPLICIT_13:
        if w == POLE_13 / a:
            raise Undefined(f"Phi_1/3 has its pole at tau={sol.pole:.9g}")
        return _state_13(a, w)

    if w == 0.0:
        raise Undefined(f"{kind.value} solution has its pole at tau={sol.shift:.9g}")
    if kind is ExactKind.BLOWUP_POLE:
        K = pole_amplitude(sol.m)
        return K / w, -K / w ** 2, 2.0 * K / w ** 3
    if kind is ExactKind.BLOWUP_COTH:
        if a == 0.0:
            return 2.0 / w, -2.0 / w ** 2, 4.0 / w ** 3
        c = 1.0 / math.tanh(a * w / 2.0)
        csch2 = c * c - 1.0
        return a * c, -a * a / 2.0 * csch2, a ** 3 / 2.0 * csch2 * c
    raise DomainError(f"unknown exact kind {kind}")


def lyapunov_parameter(sol: ExactSolution) -> float:
    """
    d such that the Lyapunov series with this d reproduces ``sol``.

    Tanh: 2a exp(-a tau_s); Exponential: a exp(-a tau_s); BlowupCoth: -2a exp(-a tau_p);
    Implicit13: d_one_third(a, shift + sqrt(3) pi/(6a)), i.e. 8.579306 a at shift 0.
    """
    a = sol.a
    if sol.kind is ExactKind.TANH:
        return 2.0 * a * math.exp(-a * sol.shift)
    if sol.kind is ExactKind.EXPONENTIAL:
        return a * math.exp(-a * sol.shift)
    if sol.kind is ExactKind.BLOWUP_COTH:
        if not a > 0:
            raise NoManifoldForm("coth family approaches -a only for a > 0")
        return -2.0 * a * math.exp(-a * sol.shift)
    if sol.kind is ExactKind.IMPLICIT_13:
        return d_one_third(a, sol.shift + SHIFT_13 / a)
    raise NoManifoldForm(f"{sol.kind.value} solutions do not lie on the stable manifold of -a")


def exact_for_bvp(m: MValue, a: float) -> Optional[ExactSolution]:
    """The closed-form BVP solution (Phi(0)=0) for m in {1/3, 1/2, inf}, else None."""
    m = MValue.parse(m)
    if m.is_infinite:
        return ExactSolution(ExactKind.EXPONENTIAL, a)
    if m.value == 0.5:
        return ExactSolution(ExactKind.TANH, a)
    if m.value == 1.0 / 3.0:
        return ExactSolution(ExactKind.IMPLICIT_13, a)
    return None


def ode_residual(sol: ExactSolution, tau: float, h: float = 1e-4) -> float:
    """Phi''' + Phi Phi'' - (m-1)/m Phi'^2 with Phi''' from a central difference of Phi''."""
    phi, dphi, ddphi = eval_exact(sol, tau)
    d3 = (eval_exact(sol, tau + h)[2] - eval_exact(sol, tau - h)[2]) / (2.0 * h)
    return d3 + phi * ddphi - sol.m.ratio * dphi * dphi


# ---------------------------------------------------------------------------
# Preset flows
# ---------------------------------------------------------------------------

class PresetName(enum.Enum):
    FLOODED_JET = "flooded-jet"
    SEPARATION = "separation"
    NEAR_WALL_JET = "near-wall-jet"

    @classmethod
    def parse(cls, text: str) -> "PresetName":
        raw = str(text).strip().lower().replace("_", "-")
        for item in cls:
            if raw in (item.value, item.value.replace("-", ""), item.name.lower().replace("_", "-")):
                return item
        raise DomainError(f"unknown preset '{text}' (choose from {', '.join(p.value for p in cls)})")


Field2D = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PresetFlow:
    """Closed-form flow of a preset problem; callables accept numpy arrays."""

    name: PresetName
    m: MValue
    a: float
    nu: float
    tau: Field2D
    u: Field2D
    v: Field2D
    psi: Field2D
    state: Callable[[float], Tuple[float, float, float]]
    reflect: bool = False

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.name is PresetName.SEPARATION:
            if np.any(x < 0):
                raise DomainError("x must be non-negative for the separation preset")
        elif np.any(x <= 0):
            raise DomainError("x must be positive")
        return x

    def metadata(self) -> Dict[str, str]:
        return {
            'preset': self.name.value,
            'm': self.m.label(),
            'a': f"{self.a:.9g}",
            'nu': f"{self.nu:.9g}",
            'reflected': str(self.reflect).lower(),
        }


def _flooded_jet(a: float, nu: float) -> PresetFlow:
    c = math.sqrt(3.0 * nu)

    def tau(x, y):
        return np.asarray(y, dtype=float) * np.asarray(x, dtype=float) ** (-2.0 / 3.0) / c

    def u(x, y):
        t = tau(x, y)
        return a * a / 2.0 * np.asarray(x, dtype=float) ** (-1.0 / 3.0) / np.cosh(a * t / 2.0) ** 2

    def v(x, y):
        t = tau(x, y)
        x = np.asarray(x, dtype=float)
        return a * math.sqrt(nu / 3.0) * x ** (-2.0 / 3.0) * (
            a * t / np.cosh(a * t / 2.0) ** 2 - np.tanh(a * t / 2.0)
        )

    def psi(x, y):
        return a * c * np.asarray(x, dtype=float) ** (1.0 / 3.0) * np.tanh(a * tau(x, y) / 2.0)

    sol = ExactSolution(ExactKind.TANH, a)
    return PresetFlow(PresetName.FLOODED_JET, sol.m, a, nu, tau, u, v, psi,
                      state=lambda t: eval_exact(sol, t), reflect=True)


def _separation(a: float, nu: float) -> PresetFlow:
    rn = math.sqrt(nu)

    def tau(x, y):
        return np.asarray(y, dtype=float) / rn + 0.0 * np.asarray(x, dtype=float)

    def u(x, y):
        return a * a * np.asarray(x, dtype=float) * np.exp(a * tau(x, y))

    def v(x, y):
        return a * rn * (1.0 - np.exp(a * tau(x, y)))

    def psi(x, y):
        return a * rn * np.asarray(x, dtype=float) * (np.exp(a * tau(x, y)) - 1.0)

    sol = ExactSolution(ExactKind.EXPONENTIAL, a)
    return PresetFlow(PresetName.SEPARATION, sol.m, a, nu, tau, u, v, psi,
                      state=lambda t: eval_exact(sol, t))


def _near_wall_jet(a: float, nu: float) -> PresetFlow:
    rn = math.sqrt(nu)
    sol = ExactSolution(ExactKind.IMPLICIT_13, a)
    tau_p = sol.pole

    # reflected solution: Phi~(tau) = -Phi(-tau), defined for tau > -tau_p
    def state(t: float) -> Tuple[float, float, float]:
        if -t >= tau_p:
            return math.nan, math.nan, math.nan
        phi, dphi, ddphi = _state_13(a, -t)
        return -phi, dphi, -ddphi

    vstate = np.vectorize(state, otypes=[float, float, float])

    def tau(x, y):
        return np.asarray(y, dtype=float) * np.asarray(x, dtype=float) ** (-0.75) / (2.0 * rn)

    def u(x, y):
        _, dphi, _ = vstate(tau(x, y))
        return np.asarray(x, dtype=float) ** (-0.5) * dphi

    def v(x, y):
        t = tau(x, y)
        phi, dphi, _ = vstate(t)
        return 1.5 * rn * np.asarray(x, dtype=float) ** (-0.75) * (t * dphi - phi / 3.0)

    def psi(x, y):
        phi, _, _ = vstate(tau(x, y))
        return 2.0 * rn * np.asarray(x, dtype=float) ** 0.25 * phi

    return PresetFlow(PresetName.NEAR_WALL_JET, sol.m, a, nu, tau, u, v, psi,
                      state=state, reflect=True)


def preset_problem(name, a: float = 1.0, nu: float = 1.0) -> PresetFlow:
    """
    Closed-form flow of one of the three preset problems.

    Args:
        name: PresetName or its text form ('flooded-jet', 'separation', 'near-wall-jet')
        a: equilibrium depth, > 0
        nu: kinematic viscosity, > 0

    Returns:
        PresetFlow with vectorized tau, u, v, psi on (x, y)
    """
    name = name if isinstance(name, PresetName) else PresetName.parse(name)
    if not a > 0:
        raise DomainError("a must be positive")
    if not nu > 0:
        raise DomainError("nu must be positive")
    builders = {
        PresetName.FLOODED_JET: _flooded_jet,
        PresetName.SEPARATION: _separation,
        PresetName.NEAR_WALL_JET: _near_wall_jet,
    }
    logger.debug("Preset %s with a=%g nu=%g", name.value, a, nu)
    return builders[name](float(a), float(nu))


def flooded_jet_momentum(a: float) -> float:
    """Integral of Phi'^2 over the real line for the m=1/2 solution: 2a^3/3."""
    return 2.0 * a ** 3 / 3.0


def flooded_jet_table(x_values: Iterable[float], a: float = 1.0, nu: float = 1.0,
                      far_y: float = FAR_Y) -> List[Dict[str, float]]:
    """
    Vertical-velocity landmarks of the flooded jet per station x.

    Returns one dict per x with y0 (v(x, y0)=0, y0>0), y_max and v_max (maximum of
    v on [0, y0]), v_lim (limit y -> inf) and v_far = v(x, far_y).
    """
    flow = preset_problem(PresetName.FLOODED_JET, a, nu)
    c = math.sqrt(3.0 * nu)

    # v changes sign where a tau sech^2(a tau/2) = tanh(a tau/2); independent of x in tau
    def g(t):
        return a * t / math.cosh(a * t / 2.0) ** 2 - math.tanh(a * t / 2.0)

    tau0 = optimize.brentq(g, 1e-6 / a, 50.0 / a, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    rows = []
    for x in x_values:
        x = float(x)
        flow.check_x(x)
        scale = c * x ** (2.0 / 3.0)
        y0 = tau0 * scale
        res = optimize.minimize_scalar(
            lambda y: -float(flow.v(x, y)), bounds=(0.0, y0), method='bounded',
            options={'xatol': 1e-10 * max(1.0, y0)},
        )
        rows.append({
            'x': x,
            'y0': y0,
            'y_max': float(res.x),
            'v_max': -float(res.fun),
            'v_lim': -a * math.sqrt(nu / 3.0) * x ** (-2.0 / 3.0),
            'v_far': float(flow.v(x, far_y)),
        })
        logger.debug("Flooded jet x=%g: y0=%.6f y_max=%.6f v_max=%.7f", x, y0, res.x, -res.fun)
    return rows
