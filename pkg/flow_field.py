#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Flow field
Physical-plane velocities and stream function of self-similar solutions,
streamline tracing, velocity profile slices and the singular overlay lines.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from app_config import SolverConfig
from mixlayer_types import DomainError, MValue, SeedOnStagnation, StepUnderflow

logger = logging.getLogger(__name__)

STAGNATION_U = 1e-12
STREAMLINE_SAMPLES = 400


class FlowSource(Protocol):
    """Anything that maps (x, y) arrays to tau, u, v and psi."""

    m: MValue
    nu: float

    def tau(self, x, y): ...

    def u(self, x, y): ...

    def v(self, x, y): ...

    def psi(self, x, y): ...

    def check_x(self, x) -> np.ndarray: ...

    def metadata(self) -> Dict[str, str]: ...


class SimilarityFlow:
    """
    Flow of a computed solution Phi(tau) for finite m:

        tau = sqrt(m/(nu(m+1))) y x^(-1/(m+1))
        u   = x^((m-1)/(m+1)) Phi'
        v   = sqrt(nu/(m(m+1))) x^(-1/(m+1)) [tau Phi' - m Phi]
        psi = sqrt(nu(m+1)/m) x^(m/(m+1)) Phi

    With ``reflect`` the profile -Phi(-tau) is used instead, which puts the
    fluid at rest on the side y -> +inf.
    """

    def __init__(self, m, nu: float, evaluator, a: float, b: Optional[float] = None,
                 reflect: bool = False):
        m = MValue.parse(m)
        if m.is_infinite:
            raise DomainError("the m=inf flow is available as the separation preset")
        if not nu > 0:
            raise DomainError(f"nu must be positive (got {nu})")
        self.m = m
        self.nu = float(nu)
        self.evaluator = evaluator
        self.a = float(a)
        self.b = b
        self.reflect = bool(reflect)
        mv = m.value
        self._tau_scale = math.sqrt(mv / (nu * (mv + 1.0)))
        self._v_scale = math.sqrt(nu / (mv * (mv + 1.0)))
        self._psi_scale = math.sqrt(nu * (mv + 1.0) / mv)

    @classmethod
    def from_ibvp(cls, solution, nu: float = 1.0, reflect: bool = False) -> "SimilarityFlow":
        return cls(solution.m, nu, solution.evaluator, solution.a, solution.b, reflect)

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("x must be positive")
        return x

    def _state(self, tau):
        if self.reflect:
            phi, dphi, ddphi = self.evaluator.state(-np.asarray(tau, dtype=float))
            return -np.asarray(phi), np.asarray(dphi), -np.asarray(ddphi)
        phi, dphi, ddphi = self.evaluator.state(np.asarray(tau, dtype=float))
        return np.asarray(phi), np.asarray(dphi), np.asarray(ddphi)

    def tau(self, x, y):
        x = np.asarray(x, dtype=float)
        return self._tau_scale * np.asarray(y, dtype=float) * x ** (-1.0 / (self.m.value + 1.0))

    def fields(self, x, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """u, v, psi in one pass over the profile."""
        mv = self.m.value
        x = np.asarray(x, dtype=float)
        t = self.tau(x, y)
        phi, dphi, _ = self._state(t)
        u = x ** ((mv - 1.0) / (mv + 1.0)) * dphi
        v = self._v_scale * x ** (-1.0 / (mv + 1.0)) * (t * dphi - mv * phi)
        psi = self._psi_scale * x ** (mv / (mv + 1.0)) * phi
        return u, v, psi

    def u(self, x, y):
        return self.fields(x, y)[0]

    def v(self, x, y):
        return self.fields(x, y)[1]

    def psi(self, x, y):
        return self.fields(x, y)[2]

    @property
    def pole(self) -> Optional[float]:
        """Pole of the profile in the (possibly reflected) tau variable."""
        p = self.evaluator.pole
        if p is None:
            return None
        return -p if self.reflect else p

    @property
    def stagnation(self) -> Optional[float]:
        """tau where Phi' first vanishes right of the origin, if recorded."""
        base = self.evaluator.base
        t = base.right.first_event('stagnation')
        if t is None:
            return None
        t = t / self.evaluator.scale
        return -t if self.reflect else t

    def metadata(self) -> Dict[str, str]:
        meta = {
            'm': self.m.label(),
            'a': f"{self.a:.9g}",
            'nu': f"{self.nu:.9g}",
            'reflected': str(self.reflect).lower(),
        }
        if self.b is not None:
            meta['b'] = f"{self.b:.9g}"
        return meta


def _source_fields(source: FlowSource, x, y):
    if hasattr(source, 'fields'):
        return source.fields(x, y)
    return source.u(x, y), source.v(x, y), source.psi(x, y)


# ---------------------------------------------------------------------------
# Grid evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowGridSpec:
    source: FlowSource
    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise DomainError("grid needs at least one point per axis")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise DomainError("grid ranges must be increasing")
        self.source.check_x([self.x_min, self.x_max])

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)


@dataclass
class Streamline:
    x: np.ndarray
    y: np.ndarray
    psi: float
    reason: str

    def __len__(self) -> int:
        return int(self.x.size)


@dataclass
class FlowField:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    streamlines: List[Streamline] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)

    def columns(self) -> Dict[str, np.ndarray]:
        """Flattened (x, y, u, v, psi) columns, x varying fastest."""
        X, Y = np.meshgrid(self.x, self.y)
        return {'x': X.ravel(), 'y': Y.ravel(), 'u': self.u.ravel(),
                'v': self.v.ravel(), 'psi': self.psi.ravel()}


def evaluate_field(spec: FlowGridSpec, workers: int = 1) -> FlowField:
    """
    u, v and psi on the grid; arrays have shape (ny, nx).

    Rows are independent and are evaluated in a thread pool when workers > 1.
    """
    xs, ys = spec.x, spec.y
    u = np.empty((ys.size, xs.size))
    v = np.empty_like(u)
    psi = np.empty_like(u)

    def row(j: int):
        u[j], v[j], psi[j] = _source_fields(spec.source, xs, np.full(xs.size, ys[j]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(row, range(ys.size)))
    else:
        for j in range(ys.size):
            row(j)

    missing = int(np.count_nonzero(~np.isfinite(u)))
    if missing:
        logger.warning("%d of %d grid cells lie outside the solution and are NaN", missing, u.size)
    meta = dict(spec.source.metadata())
    meta.update({'nx': str(xs.size), 'ny': str(ys.size)})
    logger.info("flow field %dx%d evaluated (m=%s)", xs.size, ys.size, spec.source.m.label())
    return FlowField(xs, ys, u, v, psi, metadata=meta)


# ---------------------------------------------------------------------------
# Streamlines
# ---------------------------------------------------------------------------

def trace_streamline(source: FlowSource, seed: Tuple[float, float], x_end: float,
                     arc_limit: float = math.inf, y_bounds: Optional[Tuple[float, float]] = None,
                     cfg: Optional[SolverConfig] = None) -> Streamline:
    """
    Integrate dy/dx = v/u from the seed towards x_end.

    Stops at x_end, at y_bounds, after arc_limit of arc length, or where the
    horizontal velocity vanishes.

    Raises:
        SeedOnStagnation when u(seed) is zero or undefined.
    """
    cfg = cfg or SolverConfig()
    x0, y0 = float(seed[0]), float(seed[1])
    source.check_x([x0, x_end])
    u0 = float(source.u(x0, y0))
    if not math.isfinite(u0) or abs(u0) < STAGNATION_U:
        raise SeedOnStagnation(f"u({x0:g}, {y0:g}) = {u0:.3g}: no streamline through a stagnant seed")

    def rhs(x, state):
        u, v, _ = _source_fields(source, x, state[0])
        slope = float(v) / float(u)
        return [slope, math.sqrt(1.0 + slope * slope)]

    def stagnant(x, state):
        return abs(float(source.u(x, state[0]))) - STAGNATION_U
    stagnant.terminal = True

    def arc_done(x, state):
        return arc_limit - state[1]
    arc_done.terminal = True

    events = [stagnant, arc_done]
    if y_bounds is not None:
        lo, hi = y_bounds

        def leaves(x, state):
            return min(state[0] - lo, hi - state[0])
        leaves.terminal = True
        events.append(leaves)

    sol = solve_ivp(rhs, (x0, float(x_end)), [y0, 0.0], method=cfg.method, rtol=cfg.rel_tol,
                    atol=cfg.abs_tol, dense_output=True, events=events)
    if sol.status == -1:
        raise StepUnderflow(f"streamline from ({x0:g}, {y0:g}) failed: {sol.message}")
    reason = "x_end"
    if sol.status == 1:
        fired = [i for i, t in enumerate(sol.t_events) if t.size]
        reason = ("stagnation", "arc_limit", "domain_edge")[fired[0]]
    x_last = float(sol.t[-1])
    xs = np.linspace(x0, x_last, STREAMLINE_SAMPLES) if x_last != x0 else np.array([x0])
    ys = sol.sol(xs)[0] if xs.size > 1 else np.array([y0])
    psi0 = float(source.psi(x0, y0))
    logger.debug("streamline from (%g, %g) ended at x=%g (%s)", x0, y0, x_last, reason)
    return Streamline(xs, ys, psi0, reason)


def streamline_psi_drift(source: FlowSource, line: Streamline) -> float:
    """Largest relative change of psi along a traced streamline."""
    values = np.asarray(source.psi(line.x, line.y), dtype=float)
    ref = max(abs(line.psi), float(np.max(np.abs(values))), 1e-300)
    return float(np.max(np.abs(values - line.psi))) / ref


# ---------------------------------------------------------------------------
# Profiles and overlays
# ---------------------------------------------------------------------------

def velocity_profiles(source: FlowSource, x_values: Iterable[float], y_values: Sequence[float],
                      scale_factors: Optional[Dict[float, float]] = None
                      ) -> Tuple[Dict[str, np.ndarray], Dict[str, str]]:
    """
    Slices u(x, y), v(x, y) at fixed x.

    Scale factors used by plots are recorded in the metadata only.

    Returns:
        (columns x, y, u, v; metadata)
    """
    x_values = [float(x) for x in x_values]
    source.check_x(x_values)
    ys = np.asarray(y_values, dtype=float)
    cols = {'x': [], 'y': [], 'u': [], 'v': []}
    for x in x_values:
        xs = np.full(ys.size, x)
        u, v, _ = _source_fields(source, xs, ys)
        cols['x'].append(xs)
        cols['y'].append(ys)
        cols['u'].append(np.asarray(u, dtype=float))
        cols['v'].append(np.asarray(v, dtype=float))
    columns = {k: np.concatenate(v) for k, v in cols.items()}
    meta = dict(source.metadata())
    for x, s in (scale_factors or {}).items():
        meta[f"scale_u_x={float(x):g}"] = f"{s:g}"
    return columns, meta


def overlay_line(m, tau: float, nu: float, x_values) -> np.ndarray:
    """y(x) on which the similarity variable equals tau."""
    mv = MValue.parse(m).value
    x = np.asarray(x_values, dtype=float)
    return tau * math.sqrt(nu * (mv + 1.0) / mv) * x ** (1.0 / (mv + 1.0))


def singular_overlay_lines(flow: SimilarityFlow, x_values) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """Pole line and stagnation line of a flow whose profile has them."""
    x = flow.check_x(x_values)
    lines = {}
    if flow.pole is not None:
        lines['pole'] = (x, overlay_line(flow.m, flow.pole, flow.nu, x))
    if flow.stagnation is not None:
        lines['stagnation'] = (x, overlay_line(flow.m, flow.stagnation, flow.nu, x))
    return lines


# ---------------------------------------------------------------------------
# Finite-difference checks
# ---------------------------------------------------------------------------

def continuity_residual(source: FlowSource, x: float, y: float, h: float = 1e-4) -> float:
    """du/dx + dv/dy by central differences."""
    du = (float(source.u(x + h, y)) - float(source.u(x - h, y))) / (2.0 * h)
    dv = (float(source.v(x, y + h)) - float(source.v(x, y - h))) / (2.0 * h)
    return du + dv


def stream_function_residual(source: FlowSource, x: float, y: float, h: float = 1e-4) -> Tuple[float, float]:
    """(dpsi/dy - u, -dpsi/dx - v) by central differences."""
    dpsi_dy = (float(source.psi(x, y + h)) - float(source.psi(x, y - h))) / (2.0 * h)
    dpsi_dx = (float(source.psi(x + h, y)) - float(source.psi(x - h, y))) / (2.0 * h)
    return dpsi_dy - float(source.u(x, y)), -dpsi_dx - float(source.v(x, y))


def prandtl_residual(source: FlowSource, x: float, y: float, h: float = 1e-3) -> float:
    """u u_x + v u_y - nu u_yy by central differences."""
    u0 = float(source.u(x, y))
    ux = (float(source.u(x + h, y)) - float(source.u(x - h, y))) / (2.0 * h)
    up, um = float(source.u(x, y + h)), float(source.u(x, y - h))
    uy = (up - um) / (2.0 * h)
    uyy = (up - 2.0 * u0 + um) / (h * h)
    return u0 * ux + float(source.v(x, y)) * uy - source.nu * uyy
