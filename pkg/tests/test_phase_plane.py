# -*- coding: utf-8 -*-
import math
from fractions import Fraction

import numpy as np
import pytest

from mixlayer_types import DomainError, FarFieldNotReached, MValue, NumericalError
from phase_plane import (
    PhaseProfile,
    PhaseTermination,
    PhaseTerminationKind,
    case_two_residual,
    converged_fit_B,
    f_case_two,
    f_exact,
    fit_B,
    integral_relation_check,
    integrate_linear_ansatz,
    kappa_one,
    linear_ansatz_families,
    phase_bounds_check,
    phase_consistency_check,
    phase_farfield,
    phase_scaling_check,
    solve_phase_cp,
)


@pytest.fixture(scope="module")
def phase_m1(cfg):
    return solve_phase_cp("1", 1.0, 20.0, cfg)


def test_flooded_jet_curve_is_parabola(cfg):
    phase = solve_phase_cp("0.5", 1.0, 2.0, cfg)
    assert phase.termination.kind is PhaseTerminationKind.TRUNCATED
    assert "linearly" in phase.termination.reason
    phis = np.linspace(-0.99, 0.9, 50)
    assert np.max(np.abs(phase.f_at(phis) - f_exact("0.5", 1.0, phis))) < 1e-7


def test_separation_curve_is_linear(cfg):
    phase = solve_phase_cp("inf", 1.0, 5.0, cfg)
    assert phase.termination.kind is PhaseTerminationKind.COMPLETED
    assert np.max(np.abs(phase.f - (phase.phi + 1.0))) < 1e-8
    large_m = solve_phase_cp(1e9, 1.0, 5.0, cfg)
    assert np.max(np.abs(large_m.f - (large_m.phi + 1.0))) < 1e-6


def test_branch_point_without_bvp_solution(cfg):
    phase = solve_phase_cp("0.25", 1.0, 3.0, cfg)
    assert phase.termination.kind is PhaseTerminationKind.BRANCH_POINT
    assert -1.0 < phase.termination.phi_zero < 0.0
    assert phase.phi_range[1] <= phase.termination.phi_zero


def test_branch_point_at_stagnation(cfg, base):
    phase = solve_phase_cp("0.4", 1.0, 5.0, cfg)
    assert phase.termination.kind is PhaseTerminationKind.BRANCH_POINT
    right = base("0.4").right
    tau_max = right.first_event("stagnation")
    phi_at_max = float(right.state_at(tau_max)[0])
    assert phase.termination.phi_zero == pytest.approx(phi_at_max, abs=1e-6)
    assert "branch_point" in phase.termination.describe()


@pytest.mark.parametrize("m", ["0.6", "1", "2"])
def test_phase_curve_matches_time_domain(cfg, base, m):
    phase = solve_phase_cp(m, 1.0, 5.0, cfg)
    solution = base(m)
    report = phase_consistency_check(solution.shoot, phase, solution.right)
    assert report['success']
    assert report['n_points'] > 100
    assert report['max_deviation'] < 1e-5, report['message']


def test_fit_B_recovers_b_for_m1(phase_m1, cfg):
    report = fit_B(phase_m1, cfg)
    assert report['success']
    # B = m b^(1/m) is b itself for m = 1
    assert report['B'] == pytest.approx(1.3025, abs=2e-3)
    assert report['b'] == pytest.approx(report['B'])
    assert report['rms'] < 1e-6


@pytest.mark.slow
def test_fit_B_for_m2(cfg, base):
    report, phase = converged_fit_B("2", 1.0, cfg)
    assert report['success']
    assert report['B_change'] is not None
    assert phase.phi_range[1] > 20.0
    # B = m b^(1/m) with the time-domain b
    b = base("2").fit.b
    assert report['B'] == pytest.approx(2.0 * math.sqrt(b), abs=1e-3)


def test_fit_B_without_power_law(cfg):
    phase = solve_phase_cp("0.5", 1.0, 2.0, cfg)
    report = fit_B(phase, cfg)
    assert not report['success']
    assert report['B'] is None


def test_start_offset_does_not_matter(cfg):
    near = solve_phase_cp("1", 1.0, 5.0, cfg, delta=1e-3)
    far = solve_phase_cp("1", 1.0, 5.0, cfg, delta=1e-2)
    phis = np.linspace(-0.9, 5.0, 60)
    assert np.max(np.abs(near.f_at(phis) - far.f_at(phis))) < 1e-7


def test_integral_relation(phase_m1):
    report = integral_relation_check(phase_m1)
    assert report['success']
    assert report['max_residual'] < 1e-6


def test_bounds_for_global_regime(phase_m1):
    report = phase_bounds_check(phase_m1, slack=1e-9)
    assert report['success'], report['message']
    assert report['n_points'] == len(phase_m1)


def test_scaling(cfg):
    report = phase_scaling_check("1", 2.0, cfg)
    assert not report['exact']
    assert report['max_rel_deviation'] < 1e-6
    exact = phase_scaling_check("0.5", 2.0, cfg)
    assert exact['exact']
    assert exact['max_rel_deviation'] < 1e-12


def test_f_at_outside_range_is_nan(phase_m1):
    assert math.isnan(phase_m1.f_at(-2.0))
    assert math.isnan(phase_m1.f_at(25.0))
    assert isinstance(phase_m1.f_at(0.0), float)


def test_phase_profile_validation():
    term = PhaseTermination.completed()
    one = np.array([0.0])
    with pytest.raises(NumericalError):
        PhaseProfile(MValue.finite(1.0), 1.0, one, one, one, one, term, 1e-3)
    grid = np.array([0.0, 0.0])
    with pytest.raises(NumericalError):
        PhaseProfile(MValue.finite(1.0), 1.0, grid, grid, grid, grid, term, 1e-3)


def test_exact_curves():
    assert f_exact("0.5", 2.0, 1.0) == pytest.approx(1.5)
    assert f_exact("inf", 2.0, 1.0) == pytest.approx(6.0)
    with pytest.raises(DomainError):
        f_exact("2", 1.0, 0.0)


@pytest.mark.parametrize("m", ["0.4", "1", "3", "inf"])
def test_blowup_curve_solves_phase_equation(m):
    for phi in (-3.0, 0.5, 2.0):
        assert abs(case_two_residual(phi, m)) < 1e-12


def test_blowup_curve_amplitude():
    # Phi = 3/(tau - tau_p) for m = 1 gives dPhi/dtau = -Phi^2/3
    assert f_case_two(2.0, "1") == pytest.approx(-4.0 / 3.0)
    assert f_case_two(1.0, "inf") == pytest.approx(-1.0 / 6.0)


def test_linear_ansatz_families():
    families = linear_ansatz_families()
    assert [fam.m for fam in families] == [Fraction(1, 3), Fraction(1, 2), Fraction(1), Fraction(2)]
    for fam in families:
        for phi in (-0.7, 0.5, 1.3):
            assert abs(fam.residual(phi, 0.8)) < 1e-12
    assert families[0].to_dict() == {'m': "1/3", 'A': "-3/2", 'B': "-1"}


def test_linear_ansatz_reproduces_tanh(cfg):
    half = next(fam for fam in linear_ansatz_families() if fam.m == Fraction(1, 2))
    # C = -1: dPhi/dtau = (1 - Phi^2)/2
    sol = integrate_linear_ansatz(half, -1.0, 0.0, (0.0, 2.0), cfg)
    assert sol.y[0, -1] == pytest.approx(math.tanh(1.0), abs=1e-9)


def test_linear_ansatz_constant_slope(cfg):
    one = next(fam for fam in linear_ansatz_families() if fam.m == 1)
    sol = integrate_linear_ansatz(one, -2.0, 0.0, (0.0, 1.0), cfg)
    assert sol.y[0, -1] == pytest.approx(1.0, abs=1e-10)


def test_phase_farfield():
    assert kappa_one(1.0) == pytest.approx(-1.0)
    assert phase_farfield("1", 1.3, 10.0) == pytest.approx(1.3)
    # m = 2 has no algebraic corrections: f = 2 sqrt(b) sqrt(Phi)
    assert phase_farfield("2", 0.25, 4.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        phase_farfield("0.5", 1.0, 10.0)
    with pytest.raises(FarFieldNotReached):
        phase_farfield("1", 1.0, -1.0)
    with pytest.raises(FarFieldNotReached):
        phase_farfield("3", 0.1, 0.2)
