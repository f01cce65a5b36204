#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ODE integrator
Adaptive explicit integration of Phi''' + Phi Phi'' - (m-1)/m (Phi')^2 = 0 as the
first-order system z' = (z2, z3, (m-1)/m z2^2 - z1 z3), with event detection for
zero crossings of Phi, Phi', Phi'', prescribed-tau stops and poles.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from mixlayer_types import (
    BracketLost,
    DomainError,
    MValue,
    NonFinite,
    Profile,
    StepUnderflow,
    Termination,
)

logger = logging.getLogger(__name__)

SIGNATURE_TOL = 0.1
POLE_FIT_SAMPLES = 24


class Direction(enum.Enum):
    LEFT = -1
    RIGHT = 1


@dataclass(frozen=True)
class OdeState:
    tau: float
    z1: float
    z2: float
    z3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.z1, self.z2, self.z3], dtype=float)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.tau, self.z1, self.z2, self.z3))


# Events -------------------------------------------------------------------

@dataclass(frozen=True)
class PhiZero:
    terminal: bool = True
    direction: int = 0
    name = "phi_zero"
    component = 0


@dataclass(frozen=True)
class DPhiZero:
    terminal: bool = False
    direction: int = 0
    name = "dphi_zero"
    component = 1


@dataclass(frozen=True)
class DDPhiZero:
    terminal: bool = False
    direction: int = 0
    name = "ddphi_zero"
    component = 2


@dataclass(frozen=True)
class PoleGuard:
    name = "pole_guard"


@dataclass(frozen=True)
class StopAtTau:
    tau: float
    name = "stop_at_tau"


Event = Union[PhiZero, DPhiZero, DDPhiZero, PoleGuard, StopAtTau]


@dataclass(frozen=True)
class IntegrationSpec:
    """Tolerances, events and limits for one integration run."""

    m: MValue
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    events: Tuple[Event, ...] = field(default_factory=tuple)
    pole_threshold: float = 1e6
    method: str = "DOP853"
    sample_step: Optional[float] = None
    tau_limit: float = 1e3

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-2 or not 0 < self.abs_tol <= 1e-2:
            raise DomainError("tolerances must lie in (0, 1e-2]")
        if self.pole_threshold < 1e3:
            raise DomainError("pole_threshold must be at least 1e3")
        if self.sample_step is not None and not self.sample_step > 0:
            raise DomainError("sample_step must be positive")

    @classmethod
    def from_config(cls, m: MValue, cfg, events=(), **overrides) -> "IntegrationSpec":
        values = dict(
            m=MValue.parse(m),
            rel_tol=cfg.rel_tol,
            abs_tol=cfg.abs_tol,
            max_step=cfg.max_step,
            events=tuple(events),
            pole_threshold=cfg.pole_threshold,
            method=cfg.method,
        )
        values.update(overrides)
        return cls(**values)

    def stop_tau(self) -> Optional[float]:
        for ev in self.events:
            if isinstance(ev, StopAtTau):
                return ev.tau
        return None

    def has_pole_guard(self) -> bool:
        return any(isinstance(ev, PoleGuard) for ev in self.events)


# Right-hand side ----------------------------------------------------------

def rhs(m: MValue, state: OdeState) -> Tuple[float, float, float]:
    """(z2, z3, (m-1)/m z2^2 - z1 z3); the ratio is 1 for m=inf."""
    m = MValue.parse(m)
    if not state.is_finite():
        raise NonFinite(f"non-finite state {state}")
    return (state.z2, state.z3, m.ratio * state.z2 * state.z2 - state.z1 * state.z3)


def _system(m: MValue) -> Callable[[float, np.ndarray], np.ndarray]:
    ratio = MValue.parse(m).ratio

    def fun(t, z):
        return np.array([z[1], z[2], ratio * z[1] * z[1] - z[0] * z[2]])

    return fun


def pole_amplitude(m: MValue) -> float:
    """K = 6m/(m+1) in the blow-up envelope Phi ~ K/(tau - tau_p)."""
    m = MValue.parse(m)
    if m.is_infinite:
        return 6.0
    return 6.0 * m.value / (m.value + 1.0)


def matches_blowup_signature(m: MValue, z: np.ndarray) -> bool:
    """Phi' ~ -Phi^2/K with Phi Phi'' > 0, the local shape of a simple pole."""
    phi, dphi, ddphi = (float(v) for v in z)
    if phi == 0.0 or phi * ddphi <= 0.0:
        return False
    expected = -phi * phi / pole_amplitude(m)
    return abs(dphi - expected) <= SIGNATURE_TOL * abs(expected)


def _refine_pole(sol, t_end: float, z_end: np.ndarray, t_start: float, m: MValue) -> float:
    """Fit 1/Phi = (tau - tau_p)/K on the last decade of |Phi| before the guard."""
    K = pole_amplitude(m)
    guess = t_end - K / z_end[0]
    near = abs(K / z_end[0])
    far = 10.0 * near
    lo, hi = sorted((t_end, t_end - math.copysign(far - near, guess - t_end)))
    lo, hi = max(lo, min(t_start, t_end)), min(hi, max(t_start, t_end))
    if hi - lo <= 0:
        return guess
    taus = np.linspace(lo, hi, POLE_FIT_SAMPLES)
    phis = sol(taus)[0]
    if np.any(phis == 0) or not np.all(np.isfinite(phis)):
        return guess
    slope, intercept = np.polyfit(taus, 1.0 / phis, 1)
    if slope == 0:
        return guess
    tau_p = -intercept / slope
    logger.debug("Pole refined: guess %.10f -> fit %.10f (slope %.4g vs 1/K %.4g)", guess, tau_p, slope, 1.0 / K)
    return float(tau_p)


def _event_functions(spec: IntegrationSpec):
    functions, names = [], []
    for ev in spec.events:
        if isinstance(ev, (PhiZero, DPhiZero, DDPhiZero)):
            idx = ev.component

            def fn(t, z, idx=idx):
                return z[idx]

            fn.terminal = ev.terminal
            fn.direction = ev.direction
            functions.append(fn)
            names.append(ev.name)
        elif isinstance(ev, PoleGuard):
            threshold = spec.pole_threshold
            for idx, label in ((0, "pole_guard_phi"), (2, "pole_guard_ddphi")):
                def guard(t, z, idx=idx):
                    return threshold - abs(z[idx])

                guard.terminal = True
                guard.direction = -1
                functions.append(guard)
                names.append(label)
    return functions, names


def integrate(start: OdeState, direction: Direction, spec: IntegrationSpec) -> Profile:
    """
    Integrate from ``start`` in ``direction`` until the first terminal event.

    Args:
        start: initial state (tau, Phi, Phi', Phi'')
        direction: Direction.LEFT or Direction.RIGHT
        spec: tolerances, events and limits

    Returns:
        Profile on an increasing tau grid; termination is PoleAt when the pole
        guard fired on a confirmed blow-up, Completed at StopAtTau, else Truncated.
    """
    if not start.is_finite():
        raise NonFinite(f"non-finite start state {start}")
    sign = direction.value
    t0 = float(start.tau)
    stop = spec.stop_tau()
    if stop is not None:
        if (stop - t0) * sign < 0:
            raise DomainError(f"StopAtTau({stop}) lies behind the start tau={t0} for direction {direction.name}")
        t_end = float(stop)
    else:
        t_end = t0 + sign * spec.tau_limit

    if t_end == t0:
        raise DomainError("integration span is empty")

    t_eval = None
    if spec.sample_step:
        count = int(math.floor(abs(t_end - t0) / spec.sample_step + 1e-9)) + 1
        grid = t0 + sign * spec.sample_step * np.arange(count)
        # the end point is appended exactly; rounding must not push a sample past it
        grid = grid[sign * (t_end - grid) > 1e-9 * spec.sample_step]
        t_eval = np.append(grid, t_end)

    functions, names = _event_functions(spec)
    sol = sp_integrate.solve_ivp(
        _system(spec.m),
        (t0, t_end),
        start.as_array(),
        method=spec.method,
        rtol=spec.rel_tol,
        atol=spec.abs_tol,
        max_step=spec.max_step,
        events=functions or None,
        dense_output=True,
        t_eval=t_eval,
    )

    events: Dict[str, List[float]] = {}
    fired = None
    if sol.t_events is not None:
        for name, times, states in zip(names, sol.t_events, sol.y_events):
            if len(times):
                events[name] = [float(t) for t in times]
                if sol.status == 1 and fired is None:
                    fn = functions[names.index(name)]
                    if fn.terminal:
                        fired = (name, float(times[-1]), np.asarray(states[-1], dtype=float))

    dense = sol.sol
    if sol.status == -1:
        t_last = float(sol.t[-1]) if sol.t.size else t0
        z_last = dense(t_last) if dense is not None else None
        if spec.has_pole_guard() and z_last is not None and matches_blowup_signature(spec.m, z_last):
            fired = ("pole_guard_phi", t_last, np.asarray(z_last))
            logger.debug("Step size collapsed next to a blow-up at tau=%.6f", t_last)
        else:
            raise StepUnderflow(f"integration failed at tau={t_last:.6g}: {sol.message}")

    if fired is not None:
        t_final, z_final = fired[1], fired[2]
    else:
        t_final = float(sol.t[-1]) if sol.t.size else t_end
        z_final = np.asarray(dense(t_final), dtype=float)

    termination = Termination.completed() if stop is not None else Termination.truncated("tau limit reached")
    if fired is not None:
        name = fired[0]
        if name.startswith("pole_guard"):
            if matches_blowup_signature(spec.m, z_final):
                tau_p = _refine_pole(dense, t_final, z_final, t0, spec.m)
                if (tau_p - t_final) * sign <= 0:
                    tau_p = t_final + sign * 1e-12 * max(1.0, abs(t_final))
                termination = Termination.pole_at(tau_p)
                logger.info("Pole detected at tau_p=%.7f (m=%s)", tau_p, spec.m)
            else:
                termination = Termination.truncated("pole guard exceeded without blow-up signature")
        else:
            termination = Termination.truncated(f"event {name}")

    if t_eval is not None:
        ts = np.asarray(sol.t, dtype=float)
        zs = np.asarray(sol.y, dtype=float)
        if ts.size == 0 or abs(ts[-1] - t_final) > 1e-14 * max(1.0, abs(t_final)):
            ts = np.append(ts, t_final)
            zs = np.column_stack([zs, z_final]) if zs.size else z_final.reshape(3, 1)
    else:
        ts = np.asarray(sol.t, dtype=float)
        zs = np.asarray(sol.y, dtype=float)
        ts[-1] = t_final
        zs[:, -1] = z_final

    if sign < 0:
        ts = ts[::-1]
        zs = zs[:, ::-1]
    keep = np.concatenate(([True], np.diff(ts) > 0))
    ts, zs = ts[keep], zs[:, keep]
    if not np.all(np.isfinite(zs)):
        raise NonFinite("integration produced non-finite values")

    logger.debug("Integrated %s from %.4f to %.4f in %d steps (%s)",
                 direction.name, t0, t_final, sol.t.size, termination.describe())
    return Profile(ts, zs[0], zs[1], zs[2], termination=termination, events=events, dense=dense)


def locate_event(profile: Profile, event: Event, rel_tol: float = 1e-10) -> float:
    """
    Locate ``event`` on a computed profile by root refinement on the dense output.

    Raises BracketLost when no sign change of the event function is bracketed.
    """
    if isinstance(event, StopAtTau):
        if profile.tau[0] <= event.tau <= profile.tau[-1]:
            return float(event.tau)
        raise BracketLost(f"tau={event.tau} outside the profile range")
    if not isinstance(event, (PhiZero, DPhiZero, DDPhiZero)):
        raise DomainError(f"event {event!r} cannot be located on a stored profile")

    values = (profile.phi, profile.dphi, profile.ddphi)[event.component]
    exact = np.flatnonzero(values == 0.0)
    product = values[:-1] * values[1:]
    changes = np.flatnonzero(product < 0)
    candidates = []
    if exact.size:
        candidates.append(("exact", int(exact[0])))
    if changes.size:
        candidates.append(("bracket", int(changes[0])))
    if not candidates:
        raise BracketLost(f"no sign change of {event.name} on the profile")
    kind, i = min(candidates, key=lambda c: profile.tau[c[1]])
    if kind == "exact":
        return float(profile.tau[i])

    lo, hi = float(profile.tau[i]), float(profile.tau[i + 1])

    def g(t):
        return float(profile.state_at(t)[event.component])

    if g(lo) * g(hi) > 0:
        raise BracketLost(f"dense output lost the {event.name} bracket on [{lo}, {hi}]")
    return float(optimize.brentq(g, lo, hi, xtol=rel_tol * max(1.0, abs(lo)), rtol=4 * np.finfo(float).eps))
