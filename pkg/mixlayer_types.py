#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Mixing-layer core types
Shared value types, parameter validation and the m-regime classification
used by every solver module (series, integrator, shooting, phase plane, flow).
"""

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Set, Union

import numpy as np

logger = logging.getLogger(__name__)

ONE_THIRD = 1.0 / 3.0
ONE_HALF = 0.5
BOUNDARY_SNAP = 1e-12


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class MixlayerError(Exception):
    """Base class for all solver errors. ``exit_code`` is used by the CLI."""

    exit_code = 1


class DomainError(MixlayerError):
    """Invalid parameters or a request outside a solvable regime."""

    exit_code = 2


class RegimeUnsupported(DomainError):
    pass


class OutOfDomain(DomainError):
    pass


class Undefined(DomainError):
    """Evaluation exactly at a pole."""


class NoManifoldForm(DomainError):
    pass


class OutsideLocalRadius(DomainError):
    pass


class OutOfWindow(DomainError):
    pass


class SeedOnStagnation(DomainError):
    pass


class ConfigError(DomainError):
    pass


class NumericalError(MixlayerError):
    """Convergence or integration failure."""

    exit_code = 3


class NoConvergence(NumericalError):
    pass


class PoleBeforeOrigin(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class BracketLost(NumericalError):
    pass


class DivergenceSuspected(NumericalError):
    pass


class TailTooLarge(NumericalError):
    pass


class FarFieldNotReached(NumericalError):
    pass


class OutputError(MixlayerError):
    """File output / golden comparison problems."""

    exit_code = 4


class InvalidDoc(OutputError):
    pass


class SchemaMismatch(OutputError):
    pass


class GoldenNotFound(OutputError):
    pass


# ---------------------------------------------------------------------------
# Self-similarity parameter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MValue:
    """
    Self-similarity parameter m: a finite positive value or the limit m = inf.

    Use ``MValue.finite(x)``, ``MValue.infinite()`` or ``MValue.parse(text)``.
    """

    value: float

    def __post_init__(self):
        if math.isnan(self.value) or self.value <= 0:
            raise DomainError(f"m must be positive (got {self.value})")

    @classmethod
    def finite(cls, value: float) -> "MValue":
        value = float(value)
        if math.isinf(value):
            raise DomainError("use MValue.infinite() for the m=inf limit")
        return cls(value)

    @classmethod
    def infinite(cls) -> "MValue":
        return cls(math.inf)

    @classmethod
    def parse(cls, text: Union[str, float, int, "MValue"]) -> "MValue":
        """Accepts 'inf', fractions like '1/3', or plain numbers."""
        if isinstance(text, MValue):
            return text
        if isinstance(text, (int, float)):
            return cls.infinite() if math.isinf(float(text)) else cls.finite(text)
        raw = str(text).strip().lower()
        if raw in ("inf", "infinity", "+inf", "∞"):
            return cls.infinite()
        try:
            if "/" in raw:
                return cls.finite(float(Fraction(raw)))
            return cls.finite(float(raw))
        except (ValueError, ZeroDivisionError) as e:
            raise DomainError(f"cannot parse m from '{text}': {e}") from e

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    @property
    def ratio(self) -> float:
        """(m-1)/m, taken as 1 in the m=inf limit."""
        if self.is_infinite:
            return 1.0
        return (self.value - 1.0) / self.value

    @property
    def momentum_factor(self) -> float:
        """(2m-1)/m, taken as 2 in the m=inf limit."""
        if self.is_infinite:
            return 2.0
        return (2.0 * self.value - 1.0) / self.value

    def label(self) -> str:
        if self.is_infinite:
            return "inf"
        return f"{self.value:.9g}"

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return self.label()


class Regime(enum.Enum):
    NO_BVP_SOLUTION = "NoBvpSolution"            # 0 < m < 1/3
    POLE_BOUNDED_BVP = "PoleBoundedBvp"          # 1/3 <= m < 1/2
    FLOODED_JET_BOUNDARY = "FloodedJetBoundary"  # m = 1/2
    GLOBAL_IBVP = "GlobalIbvp"                   # 1/2 < m < inf
    SEPARATION_LIMIT = "SeparationLimit"         # m = inf


def snap_m(m: MValue) -> MValue:
    """Snap m onto 1/3 or 1/2 when it lies within 1e-12 of either."""
    if m.is_infinite:
        return m
    for boundary in (ONE_THIRD, ONE_HALF):
        if m.value != boundary and abs(m.value - boundary) < BOUNDARY_SNAP:
            logger.warning("m=%.17g snapped to regime boundary %.17g", m.value, boundary)
            return MValue.finite(boundary)
    return m


def classify_regime(m: Union[MValue, float, str]) -> Regime:
    """
    Classify m into its solvability regime.

    Args:
        m: self-similarity parameter (MValue, number or text)

    Returns:
        The unique Regime; m=1/3 -> PoleBoundedBvp, m=1/2 -> FloodedJetBoundary,
        m=inf -> SeparationLimit.
    """
    m = snap_m(MValue.parse(m))
    if m.is_infinite:
        return Regime.SEPARATION_LIMIT
    value = m.value
    if value < ONE_THIRD:
        return Regime.NO_BVP_SOLUTION
    if value < ONE_HALF:
        return Regime.POLE_BOUNDED_BVP
    if value == ONE_HALF:
        return Regime.FLOODED_JET_BOUNDARY
    return Regime.GLOBAL_IBVP


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

D_FROM_BASE = "from-base"


@dataclass(frozen=True)
class Params:
    """Problem parameters. ``d`` may be ``D_FROM_BASE`` to request d = a*d_m(1)."""

    m: Optional[MValue] = None
    a: Optional[float] = None
    b: Optional[float] = None
    d: Optional[Union[float, str]] = None
    nu: Optional[float] = None
    T: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'm': None if self.m is None else self.m.label(),
            'a': self.a,
            'b': self.b,
            'd': self.d,
            'nu': self.nu,
            'T': self.T,
        }


def validate_params(
    p: Params,
    required: Set[str],
    base_d: Optional[Callable[[MValue], float]] = None,
    default_T: float = 7.0,
) -> Params:
    """
    Check ``p`` against the parameter invariants and fill defaults (nu=1, T=7).

    Args:
        p: raw parameters
        required: names of fields that must be present
        base_d: resolver m -> d_m(1), needed only when ``p.d == D_FROM_BASE``
        default_T: left cutoff used when T is absent

    Returns:
        Normalized Params
    """
    for name in sorted(required):
        if getattr(p, name) is None:
            raise DomainError(f"missing required parameter '{name}'")

    m = p.m
    if m is not None and not isinstance(m, MValue):
        m = MValue.parse(m)
    if m is not None:
        m = snap_m(m)

    if p.a is not None and not p.a > 0:
        raise DomainError("a must be positive")
    if p.b is not None and not p.b > 0:
        raise DomainError("b must be positive")
    nu = 1.0 if p.nu is None else float(p.nu)
    if not nu > 0:
        raise DomainError("nu must be positive")
    T = default_T if p.T is None else float(p.T)
    if not T >= 1:
        raise DomainError("T must be at least 1")

    d = p.d
    if d == D_FROM_BASE:
        if base_d is None or m is None or p.a is None:
            raise DomainError("d=from-base needs m, a and a base solution resolver")
        d = float(p.a) * base_d(m)
    elif d is not None:
        d = float(d)

    return replace(p, m=m, a=None if p.a is None else float(p.a),
                   b=None if p.b is None else float(p.b), d=d, nu=nu, T=T)


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

class TerminationKind(enum.Enum):
    COMPLETED = "completed"
    POLE = "pole"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    tau_p: Optional[float] = None
    reason: str = ""

    @classmethod
    def completed(cls) -> "Termination":
        return cls(TerminationKind.COMPLETED)

    @classmethod
    def pole_at(cls, tau_p: float) -> "Termination":
        return cls(TerminationKind.POLE, tau_p=float(tau_p))

    @classmethod
    def truncated(cls, reason: str) -> "Termination":
        return cls(TerminationKind.TRUNCATED, reason=reason)

    def describe(self) -> str:
        if self.kind is TerminationKind.POLE:
            return f"termination=pole tau_p={self.tau_p:.9g}"
        if self.kind is TerminationKind.TRUNCATED:
            return f"termination=truncated reason={self.reason}"
        return "termination=completed"


@dataclass(frozen=True)
class Profile:
    """
    Sampled trajectory (tau, Phi, Phi', Phi'') with termination metadata.

    ``events`` maps event names to the located tau values; ``dense`` is the
    integrator's continuous extension (callable tau -> state array) when available.
    """

    tau: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    termination: Termination = field(default_factory=Termination.completed)
    events: Dict[str, List[float]] = field(default_factory=dict)
    dense: Optional[Callable[[Any], np.ndarray]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        arrays = [np.asarray(a, dtype=float) for a in (self.phi, self.dphi, self.ddphi)]
        if tau.ndim != 1 or tau.size < 2:
            raise DomainError("profile needs at least two samples")
        if any(a.shape != tau.shape for a in arrays):
            raise DomainError("profile arrays must share the tau grid length")
        if np.any(np.diff(tau) <= 0):
            raise DomainError("profile tau grid must be strictly increasing")
        if not all(np.all(np.isfinite(a)) for a in [tau] + arrays):
            raise NonFinite("profile contains non-finite samples")
        if self.termination.kind is TerminationKind.POLE and tau[-1] >= self.termination.tau_p:
            raise DomainError("profile samples must lie left of the detected pole")
        object.__setattr__(self, 'tau', tau)
        object.__setattr__(self, 'phi', arrays[0])
        object.__setattr__(self, 'dphi', arrays[1])
        object.__setattr__(self, 'ddphi', arrays[2])

    def __len__(self) -> int:
        return int(self.tau.size)

    def state_at(self, tau: float) -> np.ndarray:
        """(Phi, Phi', Phi'') at ``tau`` from the dense output (or linear interpolation)."""
        if self.dense is not None:
            return np.asarray(self.dense(tau), dtype=float)
        return np.array([np.interp(tau, self.tau, a) for a in (self.phi, self.dphi, self.ddphi)])

    def first_event(self, name: str) -> Optional[float]:
        taus = self.events.get(name) or []
        return taus[0] if taus else None
