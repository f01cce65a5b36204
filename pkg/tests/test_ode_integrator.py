# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

import ode_integrator
from mixlayer_types import BracketLost, DomainError, MValue, NonFinite, TerminationKind
from ode_integrator import (
    DDPhiZero,
    Direction,
    DPhiZero,
    IntegrationSpec,
    OdeState,
    PhiZero,
    PoleGuard,
    StopAtTau,
    integrate,
    locate_event,
    matches_blowup_signature,
    pole_amplitude,
    rhs,
)


def tanh_state(tau, a=1.0):
    t = math.tanh(a * tau / 2.0)
    sech2 = 1.0 - t * t
    return OdeState(tau, a * t, a * a / 2.0 * sech2, -a ** 3 / 2.0 * sech2 * t)


def test_rhs():
    assert rhs(MValue.finite(1.0), OdeState(0.0, 1.0, 2.0, 3.0)) == (2.0, 3.0, -3.0)
    assert rhs(MValue.infinite(), OdeState(0.0, 1.0, 2.0, 3.0)) == (2.0, 3.0, 1.0)
    with pytest.raises(NonFinite):
        rhs(MValue.finite(1.0), OdeState(0.0, math.nan, 0.0, 0.0))


def test_pole_amplitude():
    assert pole_amplitude(MValue.finite(1.0)) == 3.0
    assert pole_amplitude(MValue.finite(2.0)) == pytest.approx(4.0)
    assert pole_amplitude(MValue.infinite()) == 6.0


def test_tanh_reproduced_on_sample_grid():
    spec = IntegrationSpec(MValue.finite(0.5), events=(StopAtTau(2.0),), sample_step=0.01)
    profile = integrate(tanh_state(-3.0), Direction.RIGHT, spec)
    assert profile.termination.kind is TerminationKind.COMPLETED
    assert profile.tau[0] == -3.0
    assert profile.tau[-1] == 2.0
    assert len(profile) == 501
    assert np.max(np.abs(profile.phi - np.tanh(profile.tau / 2.0))) < 1e-8
    assert np.max(np.abs(profile.dphi - 0.5 / np.cosh(profile.tau / 2.0) ** 2)) < 1e-8


def test_integrate_is_the_module_entry_point():
    # the scipy subpackage is bound under another name
    assert ode_integrator.integrate is integrate
    assert callable(ode_integrator.sp_integrate.solve_ivp)


def test_left_integration_returns_increasing_grid():
    spec = IntegrationSpec(MValue.finite(0.5), events=(StopAtTau(-3.0),), sample_step=0.05)
    profile = integrate(tanh_state(0.0), Direction.LEFT, spec)
    assert profile.tau[0] == -3.0
    assert profile.tau[-1] == 0.0
    assert np.all(np.diff(profile.tau) > 0)
    assert profile.phi[0] == pytest.approx(math.tanh(-1.5), abs=1e-8)


def test_exponential_for_separation_limit():
    spec = IntegrationSpec(MValue.infinite(), events=(StopAtTau(1.0),))
    start = OdeState(-2.0, math.exp(-2.0) - 1.0, math.exp(-2.0), math.exp(-2.0))
    profile = integrate(start, Direction.RIGHT, spec)
    taus = np.linspace(-2.0, 1.0, 13)
    for t in taus:
        phi, dphi, ddphi = profile.state_at(t)
        assert phi == pytest.approx(math.exp(t) - 1.0, abs=1e-9)
        assert ddphi == pytest.approx(math.exp(t), rel=1e-9)


def test_pole_detected_on_exact_blowup():
    # Phi = 3/(tau - 0) solves the m=1 equation exactly
    K = 3.0
    w = -1.0
    start = OdeState(w, K / w, -K / w ** 2, 2.0 * K / w ** 3)
    spec = IntegrationSpec(MValue.finite(1.0), events=(PoleGuard(),))
    profile = integrate(start, Direction.RIGHT, spec)
    assert profile.termination.kind is TerminationKind.POLE
    assert profile.termination.tau_p == pytest.approx(0.0, abs=1e-6)
    assert profile.tau[-1] < profile.termination.tau_p


def test_tau_limit_truncates():
    spec = IntegrationSpec(MValue.finite(0.5), tau_limit=5.0)
    profile = integrate(tanh_state(0.0), Direction.RIGHT, spec)
    assert profile.termination.kind is TerminationKind.TRUNCATED
    assert profile.tau[-1] == pytest.approx(5.0)


def test_terminal_phi_zero_stops_integration():
    spec = IntegrationSpec(MValue.finite(0.5), events=(PhiZero(),), tau_limit=10.0)
    profile = integrate(tanh_state(-3.0), Direction.RIGHT, spec)
    assert profile.termination.kind is TerminationKind.TRUNCATED
    assert profile.tau[-1] == pytest.approx(0.0, abs=1e-9)
    assert profile.first_event("phi_zero") == pytest.approx(0.0, abs=1e-9)


def test_locate_events_on_stored_profile():
    spec = IntegrationSpec(
        MValue.finite(2.0),
        events=(DPhiZero(), StopAtTau(1.5)),
    )
    # Phi = (tau - 0.25)^2 has its minimum at 0.25
    start = OdeState(-1.0, 1.5625, -2.5, 2.0)
    profile = integrate(start, Direction.RIGHT, spec)
    assert locate_event(profile, DPhiZero()) == pytest.approx(0.25, abs=1e-8)
    assert profile.first_event("dphi_zero") == pytest.approx(0.25, abs=1e-8)
    assert locate_event(profile, StopAtTau(1.0)) == 1.0
    with pytest.raises(BracketLost):
        locate_event(profile, DDPhiZero())


def test_locate_phi_zero_of_tanh():
    spec = IntegrationSpec(MValue.finite(0.5), events=(StopAtTau(2.0),), sample_step=0.1)
    profile = integrate(tanh_state(-3.0), Direction.RIGHT, spec)
    assert locate_event(profile, PhiZero()) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(BracketLost):
        locate_event(profile, StopAtTau(5.0))


def test_blowup_signature():
    m = MValue.finite(1.0)
    phi = -1000.0
    assert matches_blowup_signature(m, np.array([phi, -phi * phi / 3.0, -2.0e9]))
    assert not matches_blowup_signature(m, np.array([phi, -phi * phi, -2.0e9]))
    assert not matches_blowup_signature(m, np.array([phi, -phi * phi / 3.0, 2.0e9]))


@pytest.mark.parametrize("kwargs", [
    {'rel_tol': 0.1},
    {'abs_tol': 0.0},
    {'pole_threshold': 10.0},
    {'sample_step': 0.0},
])
def test_spec_validation(kwargs):
    with pytest.raises(DomainError):
        IntegrationSpec(MValue.finite(1.0), **kwargs)


def test_stop_behind_start_is_rejected():
    spec = IntegrationSpec(MValue.finite(1.0), events=(StopAtTau(-1.0),))
    with pytest.raises(DomainError):
        integrate(OdeState(0.0, 0.0, 1.0, 0.0), Direction.RIGHT, spec)


def test_non_finite_start_is_rejected():
    spec = IntegrationSpec(MValue.finite(1.0), events=(StopAtTau(1.0),))
    with pytest.raises(NonFinite):
        integrate(OdeState(0.0, math.inf, 1.0, 0.0), Direction.RIGHT, spec)


def test_spec_from_config(cfg):
    spec = IntegrationSpec.from_config("2", cfg, events=[PoleGuard()], sample_step=0.1)
    assert spec.m.value == 2.0
    assert spec.rel_tol == cfg.rel_tol
    assert spec.has_pole_guard()
    assert spec.stop_tau() is None
    assert spec.sample_step == 0.1
