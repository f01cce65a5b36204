#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Mixing-layer solver library
Shooting on the Lyapunov parameter d for the singular BVP on the negative
half-line, rightward extension, far-field extraction of b, scaling to the full
IBVP for given (m, b), and the integral-identity checks.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from app_config import SolverConfig
from exact_solutions import d_one_third, eval_implicit_13
from mixlayer_types import (
    DomainError,
    FarFieldNotReached,
    MixlayerError,
    MValue,
    NoConvergence,
    ONE_THIRD,
    PoleBeforeOrigin,
    Profile,
    Regime,
    RegimeUnsupported,
    TerminationKind,
    classify_regime,
    snap_m,
)
from ode_integrator import (
    DDPhiZero,
    DPhiZero,
    Direction,
    IntegrationSpec,
    OdeState,
    PhiZero,
    PoleGuard,
    StopAtTau,
    integrate,
    locate_event,
    pole_amplitude,
)
from series_helper import (
    FarfieldCoeffs,
    LyapunovCoeffs,
    eval_farfield,
    eval_lyapunov,
    eval_sim,
    farfield_coeffs,
    farfield_phi,
    lyapunov_coeffs,
    lyapunov_tail_integrals,
    sim_coeffs,
    sim_transfer_conditions,
)

logger = logging.getLogger(__name__)

# |d exp(-a T)| at the left cutoff stays below this
SERIES_START_LIMIT = 0.1
MAX_BRACKET_EXPANSIONS = 6
MAX_TAU_MAX_ROUNDS = 8
FIT_WINDOW_START = 0.6
FIT_MAX_POINTS = 200
# b must settle to this between two far-field windows
FARFIELD_B_TOL = 1e-5
MAX_FARFIELD_REFINEMENTS = 4
IDENTITY_TOL = 1e-5
INFLECTION_TOL = 1e-6

NO_SOLUTION_MESSAGE = (
    "no solution exists for m<1/3 (got m={m}): every trajectory leaving Phi=-a stops growing"
    " at a branch point with Phi < 0, so the condition Phi(0)=0 can never be met"
)


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShootResult:
    """Converged shooting result for one (m, a) and the left profile on [-T_used, 0]."""

    m: MValue
    a: float
    d: float
    phi0: float
    phi0_prime: float
    phi0_dprime: float
    residual: float
    T_used: float
    iterations: int = 0
    order: int = 12
    b_extracted: Optional[float] = None
    tau_pole: Optional[float] = None
    sign_conditions: Dict[str, bool] = field(default_factory=dict)
    profile: Optional[Profile] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.d > 0:
            raise NoConvergence(f"shooting produced d={self.d}, but a solution needs d > 0")

    @property
    def regime(self) -> Regime:
        return classify_regime(self.m)

    def to_dict(self) -> Dict:
        return {
            'm': self.m.label(),
            'a': self.a,
            'd': self.d,
            'phi0': self.phi0,
            'phi0_prime': self.phi0_prime,
            'phi0_dprime': self.phi0_dprime,
            'b_extracted': self.b_extracted,
            'tau_pole': self.tau_pole,
            'residual': self.residual,
            'T_used': self.T_used,
            'iterations': self.iterations,
            'regime': self.regime.value,
            'sign_conditions': dict(self.sign_conditions),
        }


@dataclass(frozen=True)
class FarFieldFit:
    """Far-field fit Phi ~ (tau+tau_s)^m (b + v_par) with b's spread over the window."""

    b: float
    tau_s: float
    spread: float
    xi_start: float
    n_points: int
    b_change: Optional[float] = None


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _config(cfg: Optional[SolverConfig]) -> SolverConfig:
    return cfg if cfg is not None else SolverConfig()


def _spec(m: MValue, cfg: SolverConfig, events, **overrides) -> IntegrationSpec:
    return IntegrationSpec.from_config(m, cfg, events=events, **overrides)


def _bracket(m: MValue, a: float) -> Tuple[float, float]:
    """d between the sub- and super-solution values: d_inf(a)=a below, d_1/3(a) above."""
    return 0.5 * a, 1.25 * d_one_third(a, math.sqrt(3.0) * math.pi / (6.0 * a))


def _t_used(T: float, a: float, d_hi: float) -> float:
    return max(T, (math.log(d_hi) - math.log(SERIES_START_LIMIT)) / a)


def _lyapunov_start(coeffs: LyapunovCoeffs, d: float, tau: float) -> OdeState:
    val = eval_lyapunov(coeffs, d, tau)
    return OdeState(tau, val.phi, val.dphi, val.ddphi)


def _landing_tau(start: OdeState, m: MValue, cfg: SolverConfig, tau_end: float) -> float:
    """
    tau where the trajectory first reaches Phi=0, or its maximum when that comes
    first (tangency for m=1/3). Returns tau_end when neither occurs in range.
    """
    events = (StopAtTau(tau_end), PhiZero(terminal=True, direction=1),
              DPhiZero(terminal=True, direction=-1), PoleGuard())
    profile = integrate(start, Direction.RIGHT, _spec(m, cfg, events))
    if profile.termination.kind is TerminationKind.POLE:
        raise PoleBeforeOrigin(
            f"trajectory blows up at tau={profile.termination.tau_p:.6g} before reaching Phi=0"
        )
    hits = [profile.first_event(name) for name in ("phi_zero", "dphi_zero")]
    hits = [t for t in hits if t is not None]
    return min(hits) if hits else tau_end


def _sign_conditions(m: MValue, a: float, dphi0: float, ddphi0: float) -> Dict[str, bool]:
    regime = classify_regime(m)
    slack = 1e-7 * max(a ** 3, 1.0)
    if regime in (Regime.GLOBAL_IBVP, Regime.SEPARATION_LIMIT):
        return {'dphi0_above_half_a2': dphi0 > a * a / 2.0, 'ddphi0_positive': ddphi0 > 0}
    if regime is Regime.FLOODED_JET_BOUNDARY:
        return {'ddphi0_zero': abs(ddphi0) < slack, 'dphi0_half_a2': abs(dphi0 - a * a / 2.0) < slack}
    return {'ddphi0_negative': ddphi0 < 0, 'dphi0_nonnegative': dphi0 >= -slack}


# ---------------------------------------------------------------------------
# Shooting
# ---------------------------------------------------------------------------

def shoot_left_bvp(m, a: float, cfg: Optional[SolverConfig] = None) -> ShootResult:
    """
    Solve the singular BVP on the negative half-line by shooting on d.

    The trajectory starts from the Lyapunov series at tau=-T and is integrated
    rightward; d is adjusted by a bracketed hybrid root finder until the event
    Phi=0 lands at tau=0.

    Args:
        m: self-similarity parameter, m >= 1/3
        a: equilibrium depth, > 0
        cfg: solver configuration

    Returns:
        ShootResult with the left profile attached
    """
    cfg = _config(cfg)
    m = snap_m(MValue.parse(m))
    if classify_regime(m) is Regime.NO_BVP_SOLUTION:
        raise RegimeUnsupported(NO_SOLUTION_MESSAGE.format(m=m.label()))
    if not a > 0:
        raise DomainError("a must be positive")
    a = float(a)

    coeffs = lyapunov_coeffs(m, a, cfg.lyapunov_order)
    lo, hi = _bracket(m, a)
    T_used = _t_used(cfg.T, a, hi)
    span = math.log(hi / lo) / a
    tau_end = span + 2.0 / a
    calls = [0]

    # d is a pure shift: landing(ln d) = landing(ln d_1) - (ln d - ln d_1)/a
    def g(log_d: float) -> float:
        calls[0] += 1
        landing = _landing_tau(_lyapunov_start(coeffs, math.exp(log_d), -T_used), m, cfg, tau_end)
        logger.debug("shoot m=%s: d=%.12g lands at tau=%.3e", m, math.exp(log_d), landing)
        return landing

    x_lo, x_hi = math.log(lo), math.log(hi)
    g_lo, g_hi = g(x_lo), g(x_hi)
    expansions = 0
    # hi lies above d_1/3(a), the largest d of any solution; only lo may need widening
    while g_lo < 0:
        if expansions >= MAX_BRACKET_EXPANSIONS:
            raise NoConvergence(f"no sign change of the landing point on d down to {math.exp(x_lo):.4g}")
        expansions += 1
        x_lo -= 1.0
        g_lo = g(x_lo)
    if g_hi > 0:
        raise NoConvergence(f"trajectory with d={hi:.4g} still lands right of tau=0")

    try:
        log_d = optimize.brentq(g, x_lo, x_hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (RuntimeError, ValueError) as e:
        raise NoConvergence(f"shooting on d did not converge for m={m}: {e}") from e
    d = math.exp(log_d)

    events = (StopAtTau(0.0), PhiZero(terminal=False), DPhiZero(terminal=False),
              DDPhiZero(terminal=False), PoleGuard())
    profile = integrate(_lyapunov_start(coeffs, d, -T_used), Direction.RIGHT,
                        _spec(m, cfg, events, sample_step=cfg.sample_step))
    if profile.termination.kind is TerminationKind.POLE:
        raise PoleBeforeOrigin(f"final run for d={d:.9g} blows up before tau=0")
    phi0, dphi0, ddphi0 = (float(v) for v in (profile.phi[-1], profile.dphi[-1], profile.ddphi[-1]))
    residual = abs(phi0)
    tol = max(cfg.target_tol, 100.0 * cfg.rel_tol * a)
    if residual > tol:
        raise NoConvergence(f"|Phi(0)| = {residual:.3g} exceeds the target {tol:.3g} (d={d:.9g})")

    conditions = _sign_conditions(m, a, dphi0, ddphi0)
    if not all(conditions.values()):
        logger.warning("m=%s a=%g: sign conditions at tau=0 not all met: %s", m, a, conditions)
    logger.info("Shooting converged: m=%s a=%g d=%.9g Phi'(0)=%.9g Phi''(0)=%.9g (%d runs)",
                m, a, d, dphi0, ddphi0, calls[0])
    return ShootResult(m=m, a=a, d=d, phi0=phi0, phi0_prime=dphi0, phi0_dprime=ddphi0,
                       residual=residual, T_used=T_used, iterations=calls[0], order=cfg.lyapunov_order,
                       sign_conditions=conditions, profile=profile)


def cross_check_sim_shoot(m, a: float, cfg: Optional[SolverConfig] = None) -> Dict:
    """
    Shoot on y = Phi''(-T) with start data on the stable manifold instead of
    the Lyapunov series, and compare the result at tau=0 with shoot_left_bvp.
    """
    cfg = _config(cfg)
    m = snap_m(MValue.parse(m))
    reference = shoot_left_bvp(m, a, cfg)
    T = reference.T_used
    coeffs = sim_coeffs(m, a, cfg.sim_order)
    lo, hi = _bracket(m, a)
    y_lo, y_hi = a * a * lo * math.exp(-a * T), a * a * hi * math.exp(-a * T)
    tau_end = math.log(hi / lo) / a + 2.0 / a

    def start(y: float) -> OdeState:
        phi, dphi = sim_transfer_conditions(coeffs, y, coeffs.order, tail_tol=cfg.sim_tail_tol)
        return OdeState(-T, phi, dphi, y)

    def g(log_y: float) -> float:
        return _landing_tau(start(math.exp(log_y)), m, cfg, tau_end)

    try:
        log_y = optimize.brentq(g, math.log(y_lo), math.log(y_hi), xtol=1e-14, maxiter=200)
    except (RuntimeError, ValueError) as e:
        raise NoConvergence(f"stable-manifold shooting did not converge for m={m}: {e}") from e
    y = math.exp(log_y)
    profile = integrate(start(y), Direction.RIGHT, _spec(m, cfg, (StopAtTau(0.0), PoleGuard())))
    dphi0, ddphi0 = float(profile.dphi[-1]), float(profile.ddphi[-1])
    deviation = max(abs(dphi0 - reference.phi0_prime), abs(ddphi0 - reference.phi0_dprime))
    rho1, rho2 = eval_sim(coeffs, y)
    success = deviation < 1e-6 * max(1.0, a ** 3)
    return {
        'success': success,
        'message': f"stable-manifold shooting deviates by {deviation:.3g} at tau=0",
        'y': y,
        'phi_at_minus_T': -a + rho1,
        'dphi_at_minus_T': rho2,
        'phi0_prime': dphi0,
        'phi0_dprime': ddphi0,
        'reference_d': reference.d,
        'deviation': deviation,
    }


# ---------------------------------------------------------------------------
# Rightward extension and far field
# ---------------------------------------------------------------------------

def _far_field_estimate(m: float, tau: float, phi: float, dphi: float) -> Tuple[float, float]:
    """(b, tau_s) from Phi = b w^m at one point: w = m Phi / Phi'."""
    w = m * phi / dphi
    return phi / w ** m, w - tau


def extend_right(result: ShootResult, cfg: Optional[SolverConfig] = None) -> Profile:
    """
    Continue the BVP solution to the right of tau=0.

    m > 1/2: until b tau^(m+1)/(m+1) reaches cfg.farfield_xi_min (or cfg.tau_max);
    m = 1/2: to cfg.tau_max or 20/a; m = inf: to cfg.tau_max or 10/a;
    1/3 <= m < 1/2: until the pole, with the stagnation point (Phi'=0) and any
    Phi''=0 crossings recorded as events.
    """
    cfg = _config(cfg)
    m, a = result.m, result.a
    regime = result.regime
    start = OdeState(0.0, result.phi0, result.phi0_prime, result.phi0_dprime)

    if regime is Regime.POLE_BOUNDED_BVP:
        events = (DPhiZero(terminal=False, direction=-1), DDPhiZero(terminal=False), PoleGuard())
        limit = cfg.tau_max if cfg.tau_max is not None else 200.0 / a
        profile = integrate(start, Direction.RIGHT,
                            _spec(m, cfg, events, sample_step=cfg.sample_step, tau_limit=limit))
        if profile.termination.kind is not TerminationKind.POLE:
            raise NoConvergence(f"no pole found for m={m} up to tau={profile.tau[-1]:.4g}")
        tau_max = profile.first_event("dphi_zero")
        if tau_max is None and abs(result.phi0_prime) <= 1e-8 * a * a:
            tau_max = 0.0
        events_out = dict(profile.events)
        if tau_max is not None:
            events_out['stagnation'] = [float(tau_max)]
        logger.info("m=%s a=%g: pole at tau_p=%.7f, stagnation at tau_max=%s",
                    m, a, profile.termination.tau_p, tau_max)
        return replace(profile, events=events_out)

    if regime is Regime.FLOODED_JET_BOUNDARY or regime is Regime.SEPARATION_LIMIT:
        default = 20.0 / a if regime is Regime.FLOODED_JET_BOUNDARY else 10.0 / a
        tau_end = cfg.tau_max if cfg.tau_max is not None else default
        return integrate(start, Direction.RIGHT,
                         _spec(m, cfg, (StopAtTau(tau_end), PoleGuard()), sample_step=cfg.sample_step))

    mv = m.value
    tau_end = cfg.tau_max if cfg.tau_max is not None else 10.0 / a
    for round_no in range(MAX_TAU_MAX_ROUNDS):
        profile = integrate(start, Direction.RIGHT,
                            _spec(m, cfg, (StopAtTau(tau_end), PoleGuard()), sample_step=cfg.sample_step))
        if profile.termination.kind is not TerminationKind.COMPLETED:
            raise NoConvergence(f"extension for m={m} stopped early: {profile.termination.describe()}")
        if cfg.tau_max is not None:
            return profile
        b_est, tau_s = _far_field_estimate(mv, tau_end, profile.phi[-1], profile.dphi[-1])
        w_needed = ((mv + 1.0) * cfg.farfield_xi_min / b_est) ** (1.0 / (mv + 1.0))
        needed = w_needed - tau_s
        logger.debug("extend m=%s round %d: tau_end=%.4g b~%.6g needs tau_max=%.4g",
                     m, round_no, tau_end, b_est, needed)
        if tau_end >= needed:
            return profile
        tau_end = 1.1 * needed
    raise FarFieldNotReached(f"far field not reached for m={m} within {MAX_TAU_MAX_ROUNDS} extensions")


def extract_b(profile: Profile, m, cfg: Optional[SolverConfig] = None) -> FarFieldFit:
    """
    Fit b and tau_s so that Phi/(tau+tau_s)^m matches b + v_par(xi) on the window
    [0.6, 1] * tau_max, with xi = (tau+tau_s)^(m+1)/(m+1).

    Returns:
        FarFieldFit; ``spread`` is the range of pointwise b estimates over the window.
    """
    cfg = _config(cfg)
    m = MValue.parse(m)
    if m.is_infinite or not m.value > 0.5:
        raise DomainError("extract_b needs finite m > 1/2")
    mv = m.value
    tau_max = float(profile.tau[-1])
    if not tau_max > 0:
        raise FarFieldNotReached("profile does not extend to positive tau")
    mask = profile.tau >= FIT_WINDOW_START * tau_max
    idx = np.flatnonzero(mask)
    if idx.size < 4:
        raise FarFieldNotReached("fit window holds fewer than four samples")
    if idx.size > FIT_MAX_POINTS:
        idx = idx[np.linspace(0, idx.size - 1, FIT_MAX_POINTS).astype(int)]
    taus, phis = profile.tau[idx], profile.phi[idx]

    b0, ts0 = _far_field_estimate(mv, tau_max, profile.phi[-1], profile.dphi[-1])
    xi_end = b0 * (tau_max + ts0) ** (mv + 1.0) / (mv + 1.0)
    if xi_end < cfg.farfield_xi_min * (1.0 - 1e-6):
        raise FarFieldNotReached(
            f"b tau^(m+1)/(m+1) = {xi_end:.3g} at tau_max={tau_max:.4g}, need {cfg.farfield_xi_min:g}"
        )

    def model_correction(b: float, w: np.ndarray) -> np.ndarray:
        coeffs = farfield_coeffs(mv, b, cfg.farfield_fit_order)
        xi = w ** (mv + 1.0) / (mv + 1.0)
        return np.array([eval_farfield(coeffs, x)[0] for x in xi])

    def residual(params: np.ndarray) -> np.ndarray:
        b, ts = params
        w = np.maximum(taus + ts, 1e-12)
        return phis / w ** mv - b - model_correction(b, w)

    fit = optimize.least_squares(residual, x0=[b0, ts0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    b, ts = float(fit.x[0]), float(fit.x[1])
    if not b > 0 or not np.all(taus + ts > 0):
        raise FarFieldNotReached(f"far-field fit left the admissible region (b={b:.4g}, tau_s={ts:.4g})")
    w = taus + ts
    pointwise = phis / w ** mv - model_correction(b, w)
    spread = float(np.max(pointwise) - np.min(pointwise))
    xi_start = b * w[0] ** (mv + 1.0) / (mv + 1.0)
    logger.info("Far-field fit m=%s: b=%.9g tau_s=%.6g spread=%.2e (%d points)", m, b, ts, spread, taus.size)
    return FarFieldFit(b=b, tau_s=ts, spread=spread, xi_start=float(xi_start), n_points=int(taus.size))


def converged_far_field(result: ShootResult, cfg: Optional[SolverConfig] = None) -> Tuple[Profile, FarFieldFit]:
    """
    Extend and fit with a doubling far-field reach until b moves by less than
    FARFIELD_B_TOL. A fixed cfg.tau_max disables the refinement.

    Returns:
        (right profile, FarFieldFit) of the last window; ``b_change`` holds the
        final difference between two consecutive windows.
    """
    cfg = _config(cfg)
    right = extend_right(result, cfg)
    fit = extract_b(right, result.m, cfg)
    if cfg.tau_max is not None:
        return right, fit
    xi_min = cfg.farfield_xi_min
    change = None
    for _ in range(MAX_FARFIELD_REFINEMENTS):
        xi_min *= 2.0
        wider = cfg.with_overrides(farfield_xi_min=xi_min)
        right_next = extend_right(result, wider)
        fit_next = extract_b(right_next, result.m, wider)
        change = abs(fit_next.b - fit.b)
        logger.debug("far field m=%s: xi_min=%g b=%.9g (change %.2e)", result.m, xi_min, fit_next.b, change)
        right, fit = right_next, fit_next
        if change < FARFIELD_B_TOL:
            return right, replace(fit, b_change=change)
    logger.warning("b for m=%s still moves by %.2e after %d far-field refinements",
                   result.m, change, MAX_FARFIELD_REFINEMENTS)
    return right, replace(fit, b_change=change)


def far_field_velocity_coefficient(m, b: float, nu: float = 1.0) -> float:
    """U0 = m b (m/((m+1) nu))^((m-1)/2): the limit of u / y^(m-1) for y -> inf."""
    m = MValue.parse(m)
    if m.is_infinite:
        raise DomainError("the far-field velocity law needs finite m")
    mv = m.value
    return mv * b * (mv / ((mv + 1.0) * nu)) ** ((mv - 1.0) / 2.0)


# ---------------------------------------------------------------------------
# Base solutions, cache and the scaled IBVP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseSolution:
    shoot: ShootResult
    right: Profile
    fit: Optional[FarFieldFit] = None


class SolutionCache:
    """Run-local memo of base solutions per (m, a, config); safe for concurrent use."""

    def __init__(self):
        self._entries: Dict[Tuple, BaseSolution] = {}
        self.lock = threading.Lock()

    def get(self, key: Tuple) -> Optional[BaseSolution]:
        with self.lock:
            return self._entries.get(key)

    def put(self, key: Tuple, value: BaseSolution) -> BaseSolution:
        with self.lock:
            return self._entries.setdefault(key, value)

    def clear(self) -> None:
        with self.lock:
            self._entries.clear()

    def __len__(self) -> int:
        with self.lock:
            return len(self._entries)


_CACHE = SolutionCache()


def base_solution(m, a: float = 1.0, cfg: Optional[SolverConfig] = None,
                  cache: Optional[SolutionCache] = None) -> BaseSolution:
    """Shoot, extend and (for m > 1/2) fit b, memoized per (m, a, cfg)."""
    cfg = _config(cfg)
    cache = _CACHE if cache is None else cache
    m = snap_m(MValue.parse(m))
    key = (m.value, float(a), cfg)
    hit = cache.get(key)
    if hit is not None:
        return hit
    shoot = shoot_left_bvp(m, a, cfg)
    fit = None
    if classify_regime(m) is Regime.GLOBAL_IBVP:
        right, fit = converged_far_field(shoot, cfg)
    else:
        right = extend_right(shoot, cfg)
    if fit is not None:
        shoot = replace(shoot, b_extracted=fit.b)
    elif right.termination.kind is TerminationKind.POLE:
        shoot = replace(shoot, tau_pole=right.termination.tau_p)
    return cache.put(key, BaseSolution(shoot, right, fit))


def base_d(m, cfg: Optional[SolverConfig] = None) -> float:
    """d_m(1)."""
    return _shoot_only(m, cfg).d


def _shoot_only(m, cfg: Optional[SolverConfig]) -> ShootResult:
    cfg = _config(cfg)
    m = snap_m(MValue.parse(m))
    hit = _CACHE.get((m.value, 1.0, cfg))
    if hit is not None:
        return hit.shoot
    return shoot_left_bvp(m, 1.0, cfg)


def base_b(m, cfg: Optional[SolverConfig] = None) -> float:
    """b_m(1) for m > 1/2."""
    m = snap_m(MValue.parse(m))
    if classify_regime(m) is not Regime.GLOBAL_IBVP:
        raise RegimeUnsupported("b_m(1) exists only for 1/2 < m < inf")
    return base_solution(m, 1.0, cfg).fit.b


class SolutionEvaluator:
    """
    Phi, Phi', Phi'' on the whole real line for a computed base solution, scaled
    by ``scale``: Phi(tau) = s Phi_base(s tau), Phi' = s^2 Phi_base', Phi'' = s^3 Phi_base''.

    Left of the stored profile the Lyapunov series is used; right of it the
    far-field asymptotics (m > 1/2) or NaN beyond a pole.
    """

    def __init__(self, base: BaseSolution, cfg: Optional[SolverConfig] = None, scale: float = 1.0):
        cfg = _config(cfg)
        self.base = base
        self.cfg = cfg
        self.scale = float(scale)
        shoot = base.shoot
        self.m = shoot.m
        self.lyapunov: LyapunovCoeffs = lyapunov_coeffs(shoot.m, shoot.a, cfg.lyapunov_order)
        self.farfield: Optional[FarfieldCoeffs] = None
        if base.fit is not None:
            self.farfield = farfield_coeffs(shoot.m.value, base.fit.b, cfg.farfield_order)
        self.left_end = float(shoot.profile.tau[0])
        self.right_end = float(base.right.tau[-1])
        self._warned = False

    def scaled(self, scale: float) -> "SolutionEvaluator":
        return SolutionEvaluator(self.base, self.cfg, scale)

    @property
    def pole(self) -> Optional[float]:
        term = self.base.right.termination
        if term.kind is TerminationKind.POLE:
            return term.tau_p / self.scale
        return None

    def _base_state(self, t: float) -> Tuple[float, float, float]:
        shoot = self.base.shoot
        if t < self.left_end:
            val = eval_lyapunov(self.lyapunov, shoot.d, t)
            return val.phi, val.dphi, val.ddphi
        if t <= 0.0:
            return tuple(float(v) for v in shoot.profile.state_at(t))
        if t <= self.right_end:
            return tuple(float(v) for v in self.base.right.state_at(t))
        term = self.base.right.termination
        if term.kind is TerminationKind.POLE:
            if t >= term.tau_p:
                return math.nan, math.nan, math.nan
            K = pole_amplitude(self.m)
            w = t - term.tau_p
            return K / w, -K / w ** 2, 2.0 * K / w ** 3
        if self.farfield is not None:
            return farfield_phi(self.farfield, t + self.base.fit.tau_s)
        if not self._warned:
            logger.warning("tau=%.4g beyond the computed profile (end %.4g); returning NaN", t, self.right_end)
            self._warned = True
        return math.nan, math.nan, math.nan

    def state(self, tau) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized (Phi, Phi', Phi'') at ``tau`` (scalar or array)."""
        s = self.scale
        taus = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.array([self._base_state(s * t) for t in taus.ravel()]).reshape(taus.shape + (3,))
        phi, dphi, ddphi = s * out[..., 0], s * s * out[..., 1], s ** 3 * out[..., 2]
        if np.ndim(tau) == 0:
            return float(phi[0]), float(dphi[0]), float(ddphi[0])
        return phi, dphi, ddphi

    __call__ = state


@dataclass(frozen=True)
class IbvpSolution:
    m: MValue
    b: float
    a: float
    d: float
    base: BaseSolution
    evaluator: SolutionEvaluator = field(compare=False, repr=False)

    def to_dict(self) -> Dict:
        return {'m': self.m.label(), 'b': self.b, 'a': self.a, 'd': self.d,
                'base_d': self.base.shoot.d, 'base_b': self.base.fit.b if self.base.fit else None}


def solve_ibvp(m, b_target: float, cfg: Optional[SolverConfig] = None) -> IbvpSolution:
    """
    Solve the full problem for given (m, b) by scaling the a=1 base solution:
    a = (b/b_m(1))^(1/(m+1)), d = a d_m(1), Phi(tau; a) = a Phi(a tau; 1).
    """
    cfg = _config(cfg)
    m = snap_m(MValue.parse(m))
    if classify_regime(m) is not Regime.GLOBAL_IBVP:
        raise RegimeUnsupported(f"the IBVP with prescribed b needs 1/2 < m < inf (got m={m})")
    if not b_target > 0:
        raise DomainError("b must be positive")
    base = base_solution(m, 1.0, cfg)
    a = (b_target / base.fit.b) ** (1.0 / (m.value + 1.0))
    d = a * base.shoot.d
    logger.info("IBVP m=%s b=%.9g: a=%.9g d=%.9g", m, b_target, a, d)
    return IbvpSolution(m=m, b=float(b_target), a=a, d=d, base=base,
                        evaluator=SolutionEvaluator(base, cfg, scale=a))


def bvp_evaluator(m, a: float, cfg: Optional[SolverConfig] = None) -> SolutionEvaluator:
    """Evaluator of the BVP solution for any m >= 1/3 via the a=1 base solution."""
    cfg = _config(cfg)
    if not a > 0:
        raise DomainError("a must be positive")
    return SolutionEvaluator(base_solution(m, 1.0, cfg), cfg, scale=float(a))


# ---------------------------------------------------------------------------
# Integral identities, inflection and two-sided estimates
# ---------------------------------------------------------------------------

def _left_integrals(result: ShootResult, upto: Optional[float] = None) -> Tuple[float, float]:
    """(int Phi'^2, int s Phi'^2) from -inf to ``upto`` (default 0)."""
    profile = result.profile
    coeffs = lyapunov_coeffs(result.m, result.a, result.order)
    tail1, tail2 = lyapunov_tail_integrals(coeffs, result.d, float(profile.tau[0]))
    if upto is None:
        taus, dphi = profile.tau, profile.dphi
        body1 = sp_integrate.simpson(dphi * dphi, x=taus)
        body2 = sp_integrate.simpson(taus * dphi * dphi, x=taus)
    else:
        body1, _ = sp_integrate.quad(lambda t: profile.state_at(t)[1] ** 2, profile.tau[0], upto,
                                     epsabs=1e-14, epsrel=1e-12, limit=200)
        body2, _ = sp_integrate.quad(lambda t: t * profile.state_at(t)[1] ** 2, profile.tau[0], upto,
                                     epsabs=1e-14, epsrel=1e-12, limit=200)
    return tail1 + body1, tail2 + body2


def verify_integral_identities(result: ShootResult, profile: Optional[Profile] = None) -> Dict:
    """
    Check Phi''(0) = k int Phi'^2 and Phi'(0) = a^2/2 - k int s Phi'^2 (k = (2m-1)/m,
    integrals over (-inf, 0]) using quadrature on the profile plus the series tail.
    Also reports the worst deviation of Phi' = (a^2-Phi^2)/2 + k int (tau-s) Phi'^2 ds
    along the profile.

    Returns:
        dict with 'success', 'message' and the measured quantities
    """
    profile = result.profile if profile is None else profile
    a, k = result.a, result.m.momentum_factor
    i1, i2 = _left_integrals(result)
    dd_rhs = k * i1
    d_rhs = a * a / 2.0 - k * i2
    dd_err = abs(result.phi0_dprime - dd_rhs) / max(abs(result.phi0_dprime), a ** 3)
    d_err = abs(result.phi0_prime - d_rhs) / max(abs(result.phi0_prime), a ** 2)

    if profile.tau[0] >= 0.0:
        # rightward extension: continue the integrals from their values at tau=0
        start1, start2 = i1, i2
    else:
        coeffs = lyapunov_coeffs(result.m, a, result.order)
        start1, start2 = lyapunov_tail_integrals(coeffs, result.d, float(profile.tau[0]))
    sq = profile.dphi ** 2
    c1 = start1 + sp_integrate.cumulative_trapezoid(sq, profile.tau, initial=0.0)
    c2 = start2 + sp_integrate.cumulative_trapezoid(profile.tau * sq, profile.tau, initial=0.0)
    along = profile.dphi - (a * a - profile.phi ** 2) / 2.0 - k * (profile.tau * c1 - c2)
    scale = np.maximum(np.abs(profile.dphi), a * a)
    along_err = float(np.max(np.abs(along) / scale))

    success = dd_err < IDENTITY_TOL and d_err < IDENTITY_TOL
    return {
        'success': success,
        'message': (f"Phi''(0) identity rel. error {dd_err:.2e}, Phi'(0) identity rel. error {d_err:.2e}"),
        'ddphi0': result.phi0_dprime,
        'ddphi0_rhs': dd_rhs,
        'ddphi0_error': dd_err,
        'dphi0': result.phi0_prime,
        'dphi0_rhs': d_rhs,
        'dphi0_error': d_err,
        'profile_identity_error': along_err,
    }


def locate_inflection(result: ShootResult) -> Dict:
    """
    Inflection point tau_in < 0 (Phi''=0) of a pole-regime solution and the
    relation Phi Phi'(tau_in) = k int_{-inf}^{tau_in} Phi'^2.
    """
    if result.regime is not Regime.POLE_BOUNDED_BVP:
        raise RegimeUnsupported("an inflection point on the negative half-line exists only for 1/3 <= m < 1/2")
    tau_in = locate_event(result.profile, DDPhiZero())
    phi, dphi, _ = (float(v) for v in result.profile.state_at(tau_in))
    i1, _ = _left_integrals(result, upto=tau_in)
    lhs, rhs = phi * dphi, result.m.momentum_factor * i1
    err = abs(lhs - rhs) / result.a ** 3
    return {
        'success': err < INFLECTION_TOL and tau_in < 0,
        'message': f"inflection at tau={tau_in:.9g}, relation residual {err:.2e}",
        'tau_in': tau_in,
        'lhs': lhs,
        'rhs': rhs,
        'residual': err,
    }


def check_two_sided_estimates(evaluator: SolutionEvaluator, a: float, taus: Iterable[float],
                              slack: float = 1e-8) -> Dict:
    """
    Check the solution against the exact families that enclose it.

    m >= 1/2: a(e^{a tau}-1) <= Phi <= a tanh(a tau/2) for tau <= 0 and
    a tanh(a tau/2) <= Phi <= a(e^{a tau}-1) for tau > 0.
    1/3 <= m <= 1/2: a tanh(a tau/2) <= Phi <= Phi_{1/3}(tau, a) for tau <= 0,
    the order of the Lyapunov parameters d_{1/2} <= d_m <= d_{1/3}; points with
    tau > 0 are not checked.

    Raises:
        RegimeUnsupported for m < 1/3 or m = inf
    """
    m = evaluator.m
    if m.is_infinite or m.value < ONE_THIRD:
        raise RegimeUnsupported(f"no two-sided estimate is known for m={m.label()}")
    taus = np.asarray(list(taus), dtype=float)
    tanh = a * np.tanh(a * taus / 2.0)
    if m.value >= 0.5:
        lower_exp = a * np.expm1(a * taus)
        left = taus <= 0
        low = np.where(left, lower_exp, tanh)
        high = np.where(left, tanh, lower_exp)
    else:
        keep = taus <= 0
        taus, tanh = taus[keep], tanh[keep]
        low = tanh
        high = np.array([eval_implicit_13(a, t) for t in taus])
    phi, _, _ = evaluator.state(taus)
    violation = np.maximum(low - phi - slack, phi - high - slack)
    worst = float(np.max(violation)) if taus.size else 0.0
    return {
        'success': worst <= 0,
        'message': 'two-sided estimates hold' if worst <= 0 else f"estimates violated by {worst:.3g}",
        'worst_violation': worst,
        'points': int(taus.size),
    }


# ---------------------------------------------------------------------------
# Table sweeps
# ---------------------------------------------------------------------------

class TableSweep:
    """Computes d_m(1) or b_m(1) over a list of m values with a worker pool."""

    KINDS = ("d", "b")

    def __init__(self, which: str, cfg: Optional[SolverConfig] = None):
        if which not in self.KINDS:
            raise DomainError(f"table must be one of {', '.join(self.KINDS)}")
        self.which = which
        self.cfg = _config(cfg)

    def _compute(self, m: MValue) -> Dict:
        row = {'m': m.label(), 'm_value': m.value, self.which: math.nan, 'note': ''}
        try:
            if self.which == "d":
                row['d'] = base_d(m, self.cfg)
            else:
                row['b'] = base_b(m, self.cfg)
        except MixlayerError as e:
            logger.warning("m=%s: %s", m, e)
            row['note'] = f"{type(e).__name__}: {e}"
        return row

    def run(self, m_values: Iterable, workers: Optional[int] = None) -> List[Dict]:
        """
        Sweep all m values; failures become rows with a note and do not stop the sweep.

        Returns:
            rows sorted by m
        """
        values = [snap_m(MValue.parse(m)) for m in m_values]
        workers = self.cfg.workers if workers is None else workers
        if workers <= 1:
            rows = [self._compute(m) for m in values]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(self._compute, m) for m in values]
                rows = [future.result() for future in as_completed(futures)]
        return sorted(rows, key=lambda r: r['m_value'])
