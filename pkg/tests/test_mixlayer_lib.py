# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from exact_solutions import POLE_13
from mixlayer_lib import (
    ShootResult,
    SolutionCache,
    TableSweep,
    base_d,
    base_solution,
    bvp_evaluator,
    check_two_sided_estimates,
    cross_check_sim_shoot,
    far_field_velocity_coefficient,
    locate_inflection,
    shoot_left_bvp,
    solve_ibvp,
    verify_integral_identities,
)
from mixlayer_types import (
    DomainError,
    MValue,
    NoConvergence,
    RegimeUnsupported,
    TerminationKind,
)

D_TABLE = [
    ("1/3", 8.579306),
    ("0.4", 2.8218),
    ("0.5", 2.0),
    ("0.6", 1.6975),
    ("1", 1.3188),
    ("2", 1.1358),
    ("5", 1.05),
    ("100", 1.0024),
]

B_TABLE = [
    ("0.55", 0.50516),
    ("0.7", 0.98975),
    ("1", 1.3025),
    ("1.04", 1.3053),
    ("2", 0.56684),
    ("3", 0.10274),
]


@pytest.mark.parametrize("m, d", D_TABLE)
def test_base_d_table(cfg, m, d):
    assert base_d(m, cfg) == pytest.approx(d, abs=2e-3)


def test_base_d_exact_cases(cfg):
    assert base_d("0.5", cfg) == pytest.approx(2.0, abs=1e-6)
    assert base_d("inf", cfg) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("m, b", B_TABLE)
def test_base_b_table(base, m, b):
    assert base(m).fit.b == pytest.approx(b, abs=2e-3)


@pytest.mark.slow
@pytest.mark.parametrize("m", ["0.55", "2"])
def test_far_field_fit_is_converged(cfg, base, m):
    fit = base(m).fit
    assert fit.b_change is not None and fit.b_change < 1e-5
    # the refined b does not depend on where the refinement starts
    short = base_solution(m, 1.0, cfg.with_overrides(farfield_xi_min=20.0))
    assert short.fit.b == pytest.approx(fit.b, abs=3e-5)


def test_d_insensitive_to_left_cutoff(cfg):
    d7 = base_d("1", cfg)
    d9 = base_d("1", cfg.with_overrides(T=9.0))
    assert abs(d7 - d9) < 1e-6


def test_shooting_scales_with_a(cfg):
    result = shoot_left_bvp("1", 2.0, cfg)
    assert result.d == pytest.approx(2.0 * base_d("1", cfg), rel=1e-6)
    assert result.phi0 == pytest.approx(0.0, abs=1e-8)


def test_shoot_rejects_bad_input(cfg):
    with pytest.raises(RegimeUnsupported):
        shoot_left_bvp("0.3", 1.0, cfg)
    with pytest.raises(DomainError):
        shoot_left_bvp("1", 0.0, cfg)


def test_shoot_result_needs_positive_d():
    with pytest.raises(NoConvergence):
        ShootResult(m=MValue.finite(1.0), a=1.0, d=-1.0, phi0=0.0, phi0_prime=1.0,
                    phi0_dprime=1.0, residual=0.0, T_used=7.0)


def test_sign_conditions_at_origin(base):
    global_ibvp = base("1").shoot
    assert global_ibvp.sign_conditions == {'dphi0_above_half_a2': True, 'ddphi0_positive': True}
    flooded = base("0.5").shoot
    assert all(flooded.sign_conditions.values())
    assert flooded.phi0_prime == pytest.approx(0.5, abs=1e-7)
    pole_bounded = base("0.4").shoot
    assert all(pole_bounded.sign_conditions.values())


def test_shoot_result_to_dict(base):
    data = base("1").shoot.to_dict()
    assert data['m'] == "1"
    assert data["regime"] == "GlobalIbvp"
    assert data['b_extracted'] == pytest.approx(1.3025, abs=2e-3)


def test_cross_check_stable_manifold_shooting(cfg):
    report = cross_check_sim_shoot("1", 1.0, cfg)
    assert report['success'], report['message']
    assert report['reference_d'] == pytest.approx(1.3188, abs=2e-3)


def test_pole_of_one_third_solution(base):
    right = base("1/3").right
    assert right.termination.kind is TerminationKind.POLE
    assert right.termination.tau_p == pytest.approx(3.6275987, abs=5e-4)


@pytest.mark.slow
@pytest.mark.parametrize("m", ["3/8", "5/12", "11/24"])
def test_pole_moves_right_of_one_third_pole(base, m):
    solution = base(m)
    assert solution.shoot.tau_pole is not None
    assert solution.shoot.tau_pole > POLE_13
    stagnation = solution.right.first_event("stagnation")
    assert stagnation is not None and 0.0 < stagnation < solution.shoot.tau_pole


@pytest.mark.parametrize("m", ["0.6", "1", "3"])
def test_integral_identities(base, m):
    report = verify_integral_identities(base(m).shoot)
    assert report['success'], report['message']
    assert report['ddphi0_error'] < 1e-5
    assert report['dphi0_error'] < 1e-5


def test_inflection_of_pole_bounded_solution(base):
    report = locate_inflection(base("0.4").shoot)
    assert report['success'], report['message']
    assert report['tau_in'] < 0.0


def test_inflection_needs_pole_regime(base):
    with pytest.raises(RegimeUnsupported):
        locate_inflection(base("1").shoot)


@pytest.mark.slow
@pytest.mark.parametrize("m", ["0.55", "1", "2", "7"])
def test_two_sided_estimates(cfg, m):
    evaluator = bvp_evaluator(m, 1.0, cfg)
    report = check_two_sided_estimates(evaluator, 1.0, np.linspace(-6.0, 4.0, 41))
    assert report['success'], report['message']
    assert report['points'] == 41


@pytest.mark.parametrize("m", ["0.4", "5/12"])
def test_two_sided_estimates_below_one_half(cfg, m):
    evaluator = bvp_evaluator(m, 1.0, cfg)
    report = check_two_sided_estimates(evaluator, 1.0, np.linspace(-6.0, 1.0, 15))
    assert report['success'], report['message']
    # only the negative half-line is checked
    assert report['points'] == 13


def test_two_sided_estimates_detect_violation(cfg):
    evaluator = bvp_evaluator("0.4", 1.0, cfg)
    # the bounds of a wider profile do not enclose this one
    report = check_two_sided_estimates(evaluator, 2.0, np.linspace(-3.0, -0.5, 11))
    assert not report['success']


def test_two_sided_estimates_reject_separation_limit(cfg):
    with pytest.raises(RegimeUnsupported):
        check_two_sided_estimates(bvp_evaluator("inf", 1.0, cfg), 1.0, [-1.0])


def test_semi_jet(cfg):
    solution = solve_ibvp("1", 0.5, cfg)
    assert solution.a == pytest.approx(0.61958, abs=5e-4)
    assert solution.d == pytest.approx(0.8171, abs=5e-4)
    phi0, dphi0, _ = solution.evaluator.state(0.0)
    assert phi0 == pytest.approx(0.0, abs=1e-8)
    assert solution.to_dict()['b'] == 0.5


def test_solve_ibvp_rejects_bad_input(cfg):
    with pytest.raises(RegimeUnsupported):
        solve_ibvp("0.5", 1.0, cfg)
    with pytest.raises(DomainError):
        solve_ibvp("1", -1.0, cfg)


def test_evaluator_scaling(cfg):
    unit = bvp_evaluator("1", 1.0, cfg)
    double = bvp_evaluator("1", 2.0, cfg)
    phi, dphi, ddphi = double.state(0.5)
    phi1, dphi1, ddphi1 = unit.state(1.0)
    assert phi == pytest.approx(2.0 * phi1, rel=1e-10)
    assert dphi == pytest.approx(4.0 * dphi1, rel=1e-10)
    assert ddphi == pytest.approx(8.0 * ddphi1, rel=1e-10)


def test_evaluator_matches_tanh_everywhere(cfg):
    evaluator = bvp_evaluator("0.5", 1.0, cfg)
    taus = np.array([-20.0, -3.0, 0.7, 10.0])
    phi, _, _ = evaluator.state(taus)
    assert phi.shape == taus.shape
    assert np.max(np.abs(phi - np.tanh(taus / 2.0))) < 1e-8
    assert isinstance(evaluator.state(0.7)[0], float)
    # nothing is known beyond the stored profile for m = 1/2
    assert math.isnan(evaluator.state(50.0)[0])


def test_evaluator_is_nan_beyond_pole(cfg):
    evaluator = bvp_evaluator("0.4", 1.0, cfg)
    assert evaluator.pole is not None
    assert math.isnan(evaluator.state(evaluator.pole + 1.0)[0])
    assert evaluator.scaled(2.0).pole == pytest.approx(evaluator.pole / 2.0)


def test_far_field_velocity_coefficient():
    assert far_field_velocity_coefficient("1", 1.3) == pytest.approx(1.3)
    assert far_field_velocity_coefficient("2", 1.0, nu=1.0) == pytest.approx(2.0 * math.sqrt(2.0 / 3.0))
    with pytest.raises(DomainError):
        far_field_velocity_coefficient("inf", 1.0)


def test_solution_cache_returns_first_entry(cfg):
    cache = SolutionCache()
    first = base_solution("2", 1.0, cfg, cache=cache)
    assert len(cache) == 1
    assert base_solution("2", 1.0, cfg, cache=cache) is first
    cache.clear()
    assert len(cache) == 0


def test_table_sweep_records_failures(cfg):
    rows = TableSweep("d", cfg).run(["0.5", "0.3", "1"], workers=2)
    assert [r['m'] for r in rows] == ["0.3", "0.5", "1"]
    failed = rows[0]
    assert math.isnan(failed['d'])
    assert failed['note'].startswith("RegimeUnsupported")
    assert rows[1]['d'] == pytest.approx(2.0, abs=1e-6)
    assert rows[2]['d'] == pytest.approx(1.3188, abs=2e-3)


def test_table_sweep_rejects_unknown_kind(cfg):
    with pytest.raises(DomainError):
        TableSweep("c", cfg)


def test_table_sweep_runs_are_independent(cfg):
    sweep = TableSweep("d", cfg)
    first = sweep.run(["0.5"])
    second = sweep.run(["inf"])
    assert [r['m'] for r in first] == ["0.5"]
    assert [r['m'] for r in second] == ["inf"]
    assert second[0]['d'] == pytest.approx(1.0, abs=1e-6)


def test_d_decreases_with_m(cfg):
    values = [base_d(m, cfg) for m, _ in D_TABLE]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))


@pytest.mark.slow
def test_b_has_interior_maximum_near_1_04(base):
    b = {m: base(m).fit.b for m in ("0.7", "1", "1.04", "1.1", "2")}
    assert b["0.7"] < b["1"] < b["1.04"]
    assert b["1.04"] > b["1.1"] > b["2"]
