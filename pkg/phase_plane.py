#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Phase plane
The first-order reduction f(Phi) = dPhi/dtau along a trajectory, solved as a
degenerate initial problem at Phi = -a, its far-field asymptotics, the exact
linear-ansatz families and the consistency checks against the time domain.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from app_config import SolverConfig
from mixlayer_types import (
    DomainError,
    FarFieldNotReached,
    MValue,
    NumericalError,
    StepUnderflow,
)
from series_helper import (
    eval_phase_start,
    eval_theta,
    phase_chi_coeffs,
    theta_coeffs,
)

logger = logging.getLogger(__name__)

# f level (in units of a^2) below which a falling trajectory switches to f as
# the independent variable
BRANCH_SWITCH_LEVEL = 0.05
# f level (in units of a^2) where the linear zero of the m = 1/2 parabola is reported
LINEAR_ZERO_LEVEL = 1e-9
BRANCH_SAMPLES = 60
DEFAULT_FIT_PHI_MAX = 20.0
FIT_WINDOW_START = 0.6
FARFIELD_TAIL_TOL = 1e-6
# relative change of B between two Phi ranges that counts as settled
FIT_B_TOL = 1e-7
MAX_FIT_EXTENSIONS = 4


class PhaseTerminationKind(enum.Enum):
    COMPLETED = "completed"
    BRANCH_POINT = "branch_point"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class PhaseTermination:
    kind: PhaseTerminationKind
    phi_zero: Optional[float] = None
    reason: str = ""

    @classmethod
    def completed(cls) -> "PhaseTermination":
        return cls(PhaseTerminationKind.COMPLETED)

    @classmethod
    def branch_point_at(cls, phi_zero: float) -> "PhaseTermination":
        return cls(PhaseTerminationKind.BRANCH_POINT, phi_zero=float(phi_zero))

    @classmethod
    def truncated(cls, reason: str) -> "PhaseTermination":
        return cls(PhaseTerminationKind.TRUNCATED, reason=reason)

    def describe(self) -> str:
        if self.kind is PhaseTerminationKind.BRANCH_POINT:
            return f"termination=branch_point phi_zero={self.phi_zero:.9g}"
        if self.kind is PhaseTerminationKind.TRUNCATED:
            return f"termination=truncated reason={self.reason}"
        return "termination=completed"


@dataclass
class PhaseProfile:
    """
    Sampled phase curve f(Phi) = dPhi/dtau on an increasing Phi grid.

    ``integral`` carries int_{-a}^{Phi} f ds along the same grid.
    """

    m: MValue
    a: float
    phi: np.ndarray
    f: np.ndarray
    df: np.ndarray
    integral: np.ndarray
    termination: PhaseTermination
    delta: float
    _spline: Optional[CubicSpline] = field(default=None, repr=False)

    def __post_init__(self):
        n = self.phi.size
        if n < 2 or any(arr.size != n for arr in (self.f, self.df, self.integral)):
            raise NumericalError("phase profile needs at least two samples of equal length")
        if np.any(np.diff(self.phi) <= 0):
            raise NumericalError("phase profile grid must be strictly increasing")

    def __len__(self) -> int:
        return int(self.phi.size)

    @property
    def phi_range(self) -> Tuple[float, float]:
        return float(self.phi[0]), float(self.phi[-1])

    def f_at(self, phi):
        """Spline value of f; NaN outside the sampled range."""
        if self._spline is None:
            self._spline = CubicSpline(self.phi, self.f)
        values = np.asarray(phi, dtype=float)
        out = self._spline(values)
        out = np.where((values < self.phi[0]) | (values > self.phi[-1]), np.nan, out)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> Dict:
        return {
            'm': self.m.label(),
            'a': self.a,
            'delta': self.delta,
            'phi_min': self.phi_range[0],
            'phi_max': self.phi_range[1],
            'termination': self.termination.kind.value,
            'phi_zero': self.termination.phi_zero,
            'reason': self.termination.reason,
        }


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def phase_residual(m, phi, f, df, d2f) -> float:
    """f f'' + f'^2 + Phi f' - [(m-1)/m] f for a curve given with its Phi-derivatives."""
    c = MValue.parse(m).ratio
    return f * d2f + df * df + phi * df - c * f


def _rhs_phi(c: float):
    # state (f, g = df/dPhi, I = int f)
    def rhs(phi, y):
        f, g, _ = y
        return [g, (c * f - g * g - phi * g) / f, f]
    return rhs


def _rhs_f(c: float):
    # independent variable f, state (Phi, w = f df/dPhi, I)
    def rhs(f, y):
        phi, w, _ = y
        dphi = f / w
        return [dphi, c * f * f / w - phi, f * dphi]
    return rhs


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    count = int(math.floor((stop - start) / step)) + 1
    grid = start + step * np.arange(count)
    grid = grid[stop - grid > 1e-9 * step]
    return np.append(grid, stop)


def _check_status(sol, label: str):
    if sol.status == -1:
        raise StepUnderflow(f"phase-plane integration ({label}) failed: {sol.message}")


# ---------------------------------------------------------------------------
# Degenerate initial problem
# ---------------------------------------------------------------------------

def solve_phase_cp(m, a: float, phi_max: float, cfg: Optional[SolverConfig] = None,
                   delta: Optional[float] = None) -> PhaseProfile:
    """
    Solve f f'' + f'^2 + Phi f' = [(m-1)/m] f from the holomorphic start at Phi = -a.

    The chi series supplies f and f' at Phi = -a + delta. When a trajectory falls
    towards f = 0 the independent variable switches to f so that the
    square-root branch point is resolved.

    Args:
        m: self-similarity parameter (MValue, number or text)
        a: equilibrium depth, > 0
        phi_max: right end of the Phi range, > -a
        cfg: solver configuration (tolerances, sample_step, phase_delta, chi_order)
        delta: start offset from -a; defaults to cfg.phase_delta * a

    Returns:
        PhaseProfile terminated as Completed, BranchPointAt(phi_zero) or Truncated
    """
    cfg = cfg or SolverConfig()
    m = MValue.parse(m)
    a = float(a)
    if not a > 0:
        raise DomainError(f"a must be positive (got {a})")
    if not phi_max > -a:
        raise DomainError(f"phi_max={phi_max} must exceed -a={-a}")
    delta = cfg.phase_delta * a if delta is None else float(delta)
    if not 0 < delta < phi_max + a:
        raise DomainError(f"start offset delta={delta} outside (0, phi_max + a)")

    c = m.ratio
    k = m.momentum_factor
    chi = phase_chi_coeffs(m.value, cfg.chi_order)
    f0, g0 = eval_phase_start(chi, a, delta)
    # int_{-a}^{-a+delta} of the series
    ks = np.arange(chi.chi.size + 1, dtype=float)
    coefs = np.concatenate(([1.0], chi.chi))
    i0 = float(np.sum(coefs * delta ** (ks + 2) / ((ks + 2) * a ** (ks - 1))))

    phi0 = -a + delta
    linear_zero = abs(k) < 1e-12
    switch_level = (LINEAR_ZERO_LEVEL if linear_zero else BRANCH_SWITCH_LEVEL) * a * a

    def falls_to_zero(phi, y):
        return y[0] - switch_level
    falls_to_zero.terminal = True
    falls_to_zero.direction = -1

    def blows_up(phi, y):
        return cfg.pole_threshold - max(abs(y[0]), abs(y[1]))
    blows_up.terminal = True
    blows_up.direction = -1

    logger.debug("phase CP m=%s a=%g from Phi=%.6g (f=%.3e, f'=%.6g) to %g",
                 m.label(), a, phi0, f0, g0, phi_max)
    sol = solve_ivp(_rhs_phi(c), (phi0, phi_max), [f0, g0, i0], method=cfg.method,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, dense_output=True,
                    events=[falls_to_zero, blows_up])
    _check_status(sol, "Phi")

    phi_end = float(sol.t[-1])
    step = cfg.sample_step * a
    grid = _grid(phi0, phi_end, step) if phi_end - phi0 > step else np.array([phi0, phi_end])
    states = sol.sol(grid)
    phis, fs, gs, ints = [grid], [states[0]], [states[1]], [states[2]]

    if sol.status == 0:
        termination = PhaseTermination.completed()
    elif sol.t_events[1].size:
        termination = PhaseTermination.truncated(f"blow-up near Phi={phi_end:.6g}")
    elif linear_zero:
        # f = (a^2 - Phi^2)/2 reaches zero linearly, there is no branch here
        termination = PhaseTermination.truncated(f"f vanishes linearly at Phi={phi_end:.9g}")
    else:
        termination, extra = _continue_in_f(c, sol.y[:, -1], phi_end, cfg)
        if extra is not None:
            phis.append(extra[0])
            fs.append(extra[1])
            gs.append(extra[2])
            ints.append(extra[3])

    phi = np.concatenate(phis)
    keep = np.concatenate(([True], np.diff(phi) > 0))
    profile = PhaseProfile(m, a, phi[keep], np.concatenate(fs)[keep], np.concatenate(gs)[keep],
                           np.concatenate(ints)[keep], termination, delta)
    logger.info("phase CP m=%s a=%g: %d samples, %s",
                m.label(), a, len(profile), termination.describe())
    return profile


def _continue_in_f(c: float, y_end: np.ndarray, phi_end: float, cfg: SolverConfig):
    """Carry a falling trajectory from the switch level down to f = 0."""
    f_sw, g_sw, i_sw = (float(v) for v in y_end)
    w_sw = f_sw * g_sw

    def w_vanishes(f, y):
        return y[1]
    w_vanishes.terminal = True

    sol = solve_ivp(_rhs_f(c), (f_sw, 0.0), [phi_end, w_sw, i_sw], method=cfg.method,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, dense_output=True,
                    events=[w_vanishes])
    _check_status(sol, "f")
    if sol.status == 1:
        return PhaseTermination.truncated(
            f"f*f' vanished before f=0 near Phi={float(sol.y[0, -1]):.6g}"), None

    phi_zero = float(sol.y[0, -1])
    # geometric f grid, the end point f=0 itself has an infinite slope
    f_grid = f_sw * np.geomspace(1.0, 1e-6, BRANCH_SAMPLES)[1:]
    states = sol.sol(f_grid)
    logger.info("phase curve has a branch point at Phi=%.9g (f*f' -> %.6g)",
                phi_zero, float(sol.y[1, -1]))
    return PhaseTermination.branch_point_at(phi_zero), (
        states[0], f_grid, states[1] / f_grid, states[2])


# ---------------------------------------------------------------------------
# Exact curves
# ---------------------------------------------------------------------------

def f_exact(m, a: float, phi):
    """Closed-form phase curves: (a^2 - Phi^2)/2 for m=1/2, a(Phi + a) for m=inf."""
    m = MValue.parse(m)
    phi = np.asarray(phi, dtype=float)
    if m.is_infinite:
        out = a * (phi + a)
    elif m.value == 0.5:
        out = 0.5 * (a * a - phi * phi)
    else:
        raise DomainError(f"no closed-form phase curve for m={m.label()}")
    return float(out) if out.ndim == 0 else out


def f_case_two(phi, m):
    """The exact curve -Phi^2 (m+1)/(6m) of the blow-up solutions."""
    m = MValue.parse(m)
    coef = -1.0 / 6.0 if m.is_infinite else -(m.value + 1.0) / (6.0 * m.value)
    phi = np.asarray(phi, dtype=float)
    out = coef * phi * phi
    return float(out) if out.ndim == 0 else out


def case_two_residual(phi: float, m) -> float:
    m = MValue.parse(m)
    coef = -1.0 / 6.0 if m.is_infinite else -(m.value + 1.0) / (6.0 * m.value)
    return phase_residual(m, phi, coef * phi * phi, 2.0 * coef * phi, 2.0 * coef)


# ---------------------------------------------------------------------------
# Linear-ansatz families Psi = A F + B
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearAnsatzFamily:
    """
    f = Phi^2 F with F = (C/A)|Phi|^A - B/A; the trajectories obey
    dPhi/dtau = Phi^2 [(C/A)|Phi|^A - B/A].
    """

    m: Fraction
    A: Fraction
    B: Fraction

    def F(self, phi: float, C: float) -> float:
        A, B = float(self.A), float(self.B)
        return (C / A) * abs(phi) ** A - B / A

    def reduced_rhs(self, phi: float, C: float) -> float:
        # Phi^2 F written so that it stays finite at Phi = 0
        A, B = float(self.A), float(self.B)
        return (C / A) * abs(phi) ** (A + 2.0) - (B / A) * phi * phi

    def f_state(self, phi: float, C: float) -> Tuple[float, float, float]:
        """f, df/dPhi, d2f/dPhi2 for Phi != 0."""
        A, B = float(self.A), float(self.B)
        p = A + 2.0
        s = math.copysign(1.0, phi)
        r = abs(phi)
        f = (C / A) * r ** p - (B / A) * phi * phi
        df = (C / A) * p * s * r ** (p - 1.0) - 2.0 * (B / A) * phi
        d2f = (C / A) * p * (p - 1.0) * r ** (p - 2.0) - 2.0 * (B / A)
        return f, df, d2f

    def residual(self, phi: float, C: float) -> float:
        return phase_residual(float(self.m), phi, *self.f_state(phi, C))

    def to_dict(self) -> Dict:
        return {'m': str(self.m), 'A': str(self.A), 'B': str(self.B)}


def linear_ansatz_families() -> List[LinearAnsatzFamily]:
    """
    All (m, A, B) with m > 0 for which Psi = A F + B solves the (F, Psi) equation.

    The constraints are B^2 + B = 0, 2A^2 + 7A + 6 = 0 and
    A + 3AB + 7B + (m+1)/m = 0; the last one fixes m for every root pair.
    """
    families = []
    for B in (Fraction(0), Fraction(-1)):
        for A in (Fraction(-2), Fraction(-3, 2)):
            s = -(A + 3 * A * B + 7 * B)       # (m+1)/m
            if s == 1:
                continue
            m = 1 / (s - 1)
            if m > 0:
                families.append(LinearAnsatzFamily(m, A, B))
    families.sort(key=lambda fam: fam.m)
    return families


def integrate_linear_ansatz(family: LinearAnsatzFamily, C: float, phi0: float,
                            tau_span: Tuple[float, float],
                            cfg: Optional[SolverConfig] = None):
    """Integrate the reduced first-order equation of a family from Phi(tau0) = phi0."""
    cfg = cfg or SolverConfig()

    def rhs(tau, y):
        return [family.reduced_rhs(y[0], C)]

    def blows_up(tau, y):
        return cfg.pole_threshold - abs(y[0])
    blows_up.terminal = True

    sol = solve_ivp(rhs, tau_span, [float(phi0)], method=cfg.method,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, dense_output=True, events=[blows_up])
    _check_status(sol, "reduced")
    return sol


# ---------------------------------------------------------------------------
# Far field
# ---------------------------------------------------------------------------

def kappa_one(m: float) -> float:
    """Power of Phi in front of the exponentially small far-field term."""
    return -(2.0 * m * m + 4.0 * m - 4.0) / (m * (m + 1.0))


def phase_farfield(m, b: float, phi: float, cfg: Optional[SolverConfig] = None,
                   D: float = 0.0, B: Optional[float] = None) -> float:
    """
    Asymptotic f = B Phi^((m-1)/m) [1 + theta(x) + D Phi^kappa1 exp(-m x / (B (m+1)))]
    with x = Phi^((m+1)/m) and B = m b^(1/m) unless given explicitly.

    Raises:
        FarFieldNotReached when the theta series has not settled at this Phi.
    """
    cfg = cfg or SolverConfig()
    m = float(MValue.parse(m))
    if not 0.5 < m < math.inf:
        raise DomainError(f"phase far field needs 1/2 < m < inf (got m={m})")
    if not b > 0:
        raise DomainError(f"b must be positive (got {b})")
    if not phi > 0:
        raise FarFieldNotReached(f"Phi={phi} is not in the far field")
    B = m * b ** (1.0 / m) if B is None else float(B)
    x = phi ** ((m + 1.0) / m)
    coeffs = theta_coeffs(m, B, cfg.theta_order)
    last = abs(coeffs.theta[-1]) * x ** (-coeffs.theta.size)
    if last > FARFIELD_TAIL_TOL or not math.isfinite(last):
        raise FarFieldNotReached(f"theta series tail {last:.3g} at Phi={phi:.4g} is too large")
    theta = eval_theta(coeffs, x)[0]
    expo = D * phi ** kappa_one(m) * math.exp(-m * x / (B * (m + 1.0))) if D else 0.0
    return B * phi ** ((m - 1.0) / m) * (1.0 + theta + expo)


def fit_B(phase: PhaseProfile, cfg: Optional[SolverConfig] = None) -> Dict:
    """
    Fit the far-field amplitude B to the computed curve on the upper part of its range.

    Returns:
        dict with 'success', 'B', 'b' (= (B/m)^m), 'n_points', 'rms' and 'message'
    """
    cfg = cfg or SolverConfig()
    m = float(phase.m)
    if not 0.5 < m < math.inf:
        return {'success': False, 'B': None, 'b': None, 'n_points': 0, 'rms': None,
                'message': f"no power-law far field for m={phase.m.label()}"}
    lo, hi = phase.phi_range
    mask = phase.phi >= max(FIT_WINDOW_START * hi, 1.0)
    phis, fs = phase.phi[mask], phase.f[mask]
    if phis.size < 5:
        return {'success': False, 'B': None, 'b': None, 'n_points': int(phis.size), 'rms': None,
                'message': f"phase curve ends at Phi={hi:.4g}, too short for a far-field fit"}
    beta = (m - 1.0) / m
    guess = float(fs[-1] / phis[-1] ** beta)

    def residuals(p):
        return np.array([phase_farfield(m, 1.0, x, cfg, B=p[0]) for x in phis]) / fs - 1.0

    try:
        fit = optimize.least_squares(residuals, [guess], x_scale='jac', xtol=1e-14, ftol=1e-14)
    except FarFieldNotReached as e:
        return {'success': False, 'B': None, 'b': None, 'n_points': int(phis.size), 'rms': None,
                'message': str(e)}
    B = float(fit.x[0])
    rms = float(np.sqrt(np.mean(fit.fun ** 2)))
    logger.info("phase far-field fit m=%g: B=%.9g (rms %.2e over %d points)", m, B, rms, phis.size)
    return {'success': bool(fit.success), 'B': B, 'b': (B / m) ** m, 'n_points': int(phis.size),
            'rms': rms, 'message': fit.message}


def converged_fit_B(m, a: float, cfg: Optional[SolverConfig] = None,
                    phi_max: Optional[float] = None) -> Tuple[Dict, PhaseProfile]:
    """
    Solve the phase curve and fit B on ranges doubling in Phi until B settles.

    Returns:
        (fit report with an added 'B_change', the PhaseProfile of the last range)
    """
    cfg = cfg or SolverConfig()
    a = float(a)
    phi_max = DEFAULT_FIT_PHI_MAX * a if phi_max is None else float(phi_max)
    phase = solve_phase_cp(m, a, phi_max, cfg)
    report = fit_B(phase, cfg)
    report['B_change'] = None
    for _ in range(MAX_FIT_EXTENSIONS):
        if not report['success']:
            break
        phi_max *= 2.0
        longer = solve_phase_cp(m, a, phi_max, cfg)
        if longer.termination.kind is not PhaseTerminationKind.COMPLETED:
            break
        nxt = fit_B(longer, cfg)
        if not nxt['success']:
            break
        change = abs(nxt['B'] - report['B'])
        nxt['B_change'] = change
        phase, report = longer, nxt
        logger.debug("B fit up to Phi=%g: B=%.10g (change %.2e)", phi_max, nxt['B'], change)
        if change <= FIT_B_TOL * abs(nxt['B']):
            break
    return report, phase


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def phase_consistency_check(shoot, phase: PhaseProfile, right=None) -> Dict:
    """
    Compare the phase curve with (Phi, Phi') pairs of a time-domain solution.

    Args:
        shoot: ShootResult of the same (m, a)
        phase: PhaseProfile of the same (m, a)
        right: optional right extension Profile

    Returns:
        dict with 'success', 'max_deviation', 'n_points' and 'message'
    """
    profiles = [p for p in (shoot.profile, right) if p is not None]
    lo, hi = phase.phi_range
    phis, dphis = [], []
    for prof in profiles:
        # stop at the first Phi' = 0: beyond it the curve is another branch
        cut = np.flatnonzero(prof.dphi <= 0)
        end = cut[0] if cut.size else len(prof)
        phi, dphi = prof.phi[:end], prof.dphi[:end]
        mask = (phi >= lo) & (phi <= hi)
        phis.append(phi[mask])
        dphis.append(dphi[mask])
    phi = np.concatenate(phis) if phis else np.array([])
    dphi = np.concatenate(dphis) if dphis else np.array([])
    if phi.size == 0:
        return {'success': False, 'max_deviation': None, 'n_points': 0,
                'message': "no overlap between the time-domain and phase-plane solutions"}
    dev = float(np.max(np.abs(phase.f_at(phi) - dphi)))
    return {'success': True, 'max_deviation': dev, 'n_points': int(phi.size),
            'message': f"max |f(Phi) - Phi'| = {dev:.3e} over {phi.size} samples"}


def integral_relation_check(phase: PhaseProfile) -> Dict:
    """Residual of f f' + Phi f - [(2m-1)/m] int_{-a}^{Phi} f ds along the curve."""
    k = phase.m.momentum_factor
    res = phase.f * phase.df + phase.phi * phase.f - k * phase.integral
    finite = np.isfinite(res)
    err = float(np.max(np.abs(res[finite]))) if finite.any() else math.nan
    return {'success': bool(finite.any()), 'max_residual': err,
            'message': f"integral relation residual {err:.3e}"}


def phase_bounds_check(phase: PhaseProfile, slack: float = 0.0) -> Dict:
    """
    Two-sided bounds for 1/2 < m < inf:
    (a^2 - Phi^2)/2 < f < a(Phi + a) on (-a, a] and 0 < f < a(Phi + a) beyond.
    """
    a = phase.a
    phi, f = phase.phi, phase.f
    upper = a * (phi + a)
    lower = np.where(phi <= a, 0.5 * (a * a - phi * phi), 0.0)
    violations = int(np.count_nonzero((f < lower - slack) | (f > upper + slack)))
    return {'success': violations == 0, 'violations': violations, 'n_points': int(phi.size),
            'message': f"{violations} of {phi.size} samples outside the bounds"}


def phase_scaling_check(m, a: float, cfg: Optional[SolverConfig] = None,
                        phi_max_unit: float = 3.0) -> Dict:
    """
    Check f(Phi, a) = a^2 f(Phi/a, 1) between two independent solves.

    Returns:
        dict with 'success', 'exact', 'max_rel_deviation' and 'message'
    """
    cfg = cfg or SolverConfig()
    m = MValue.parse(m)
    a = float(a)
    if m.is_infinite or m.value == 0.5:
        phis = a * np.linspace(-0.99, min(phi_max_unit, 0.99), 200)
        lhs = f_exact(m, a, phis)
        rhs = a * a * f_exact(m, 1.0, phis / a)
        exact = True
    else:
        scaled = solve_phase_cp(m, a, a * phi_max_unit, cfg)
        unit = solve_phase_cp(m, 1.0, phi_max_unit, cfg)
        lo = max(scaled.phi_range[0], a * unit.phi_range[0])
        hi = min(scaled.phi_range[1], a * unit.phi_range[1])
        phis = np.linspace(lo, hi, 200)
        lhs = scaled.f_at(phis)
        rhs = a * a * unit.f_at(phis / a)
        exact = False
    dev = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)))
    return {'success': True, 'exact': exact, 'max_rel_deviation': dev,
            'message': f"f(Phi,{a:g}) vs {a:g}^2 f(Phi/{a:g},1): max rel deviation {dev:.3e}"}
