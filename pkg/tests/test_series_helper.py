# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixlayer_types import DivergenceSuspected, DomainError, MValue, TailTooLarge
from series_helper import (
    eval_lyapunov,
    eval_phase_start,
    eval_sim,
    eval_theta,
    farfield_coeffs,
    farfield_residual,
    lyapunov_coeffs,
    lyapunov_tail_integrals,
    phase_chi_coeffs,
    sim_coeffs,
    sim_residual,
    sim_transfer_conditions,
    theta_coeffs,
    theta_residual,
)


# Lyapunov series ----------------------------------------------------------

@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
def test_lyapunov_half_is_geometric(a):
    coeffs = lyapunov_coeffs(MValue.finite(0.5), a, 10)
    expected = (-1.0 / (2.0 * a)) ** np.arange(10)
    assert coeffs.h == pytest.approx(expected, rel=1e-13)


def test_lyapunov_infinite_is_single_term():
    coeffs = lyapunov_coeffs(MValue.infinite(), 2.0, 6)
    assert coeffs.h.tolist() == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def test_lyapunov_matches_tanh():
    coeffs = lyapunov_coeffs(MValue.finite(0.5), 1.0, 12)
    for tau in (-6.0, -4.0, -3.0):
        val = eval_lyapunov(coeffs, 2.0, tau)
        t = math.tanh(tau / 2.0)
        assert val.phi == pytest.approx(t, abs=1e-14)
        assert val.dphi == pytest.approx(0.5 * (1 - t * t), abs=1e-13)
        assert val.ddphi == pytest.approx(-0.5 * (1 - t * t) * t, abs=1e-13)


def test_lyapunov_hard_wall():
    coeffs = lyapunov_coeffs(MValue.finite(1.0), 1.0, 12)
    with pytest.raises(DivergenceSuspected):
        eval_lyapunov(coeffs, 1.0, 0.5)


def test_lyapunov_tail_integrals_exponential():
    a, d, tau = 1.5, 0.8, -2.0
    coeffs = lyapunov_coeffs(MValue.infinite(), a, 4)
    first, second = lyapunov_tail_integrals(coeffs, d, tau)
    r = 2.0 * a
    amp = a * a * d * d
    assert first == pytest.approx(amp * math.exp(r * tau) / r, rel=1e-14)
    assert second == pytest.approx(amp * math.exp(r * tau) * (tau / r - 1 / r ** 2), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.35, max_value=20.0), st.floats(min_value=0.2, max_value=5.0))
def test_lyapunov_homogeneity(m, a):
    """h_l(a) = h_l(1) / a^(l-1)."""
    unit = lyapunov_coeffs(MValue.finite(m), 1.0, 8).h
    scaled = lyapunov_coeffs(MValue.finite(m), a, 8).h
    assert scaled == pytest.approx(unit / a ** np.arange(8), rel=1e-10, abs=1e-300)


# Stable manifold ----------------------------------------------------------

@pytest.mark.parametrize("m", [0.6, 1.0, 3.0, "inf"])
def test_sim_leading_terms(m):
    coeffs = sim_coeffs(MValue.parse(m), 2.0, 6)
    assert coeffs.b_coef[0] == 0.25
    assert coeffs.c_coef[0] == 0.5


@pytest.mark.parametrize("m", [0.6, 1.0, 3.0])
def test_sim_residual_small(m):
    coeffs = sim_coeffs(MValue.finite(m), 1.0, 12)
    r1, r2 = sim_residual(coeffs, 1e-2)
    assert abs(r1) < 1e-14
    assert abs(r2) < 1e-14


def test_sim_transfer_linear_and_tail():
    coeffs = sim_coeffs(MValue.finite(1.0), 1.0, 12)
    phi, dphi = sim_transfer_conditions(coeffs, 1e-3, 1)
    assert phi == pytest.approx(-1.0 + 1e-3)
    assert dphi == pytest.approx(1e-3)
    with pytest.raises(TailTooLarge):
        sim_transfer_conditions(coeffs, 0.5, 1, tail_tol=1e-6)
    with pytest.raises(DomainError):
        sim_transfer_conditions(coeffs, 1e-3, 13)


def test_sim_agrees_with_lyapunov_for_tanh():
    """On the m=1/2 solution, (Phi + a, Phi') = (rho_1, rho_2)(Phi'')."""
    coeffs = sim_coeffs(MValue.finite(0.5), 1.0, 12)
    tau = -5.0
    t = math.tanh(tau / 2.0)
    dphi, ddphi = 0.5 * (1 - t * t), -0.5 * (1 - t * t) * t
    rho1, rho2 = eval_sim(coeffs, ddphi)
    assert rho1 == pytest.approx(t + 1.0, rel=1e-10)
    assert rho2 == pytest.approx(dphi, rel=1e-10)


# Far field ----------------------------------------------------------------

def test_farfield_first_coefficient():
    m = 3.0
    coeffs = farfield_coeffs(m, 1.0, 4)
    assert coeffs.v[0] == pytest.approx(-(m - 1) * (m - 2) / (m + 1) ** 2)


@pytest.mark.parametrize("m", [1.0, 2.0])
def test_farfield_vanishes_for_exact_cases(m):
    assert np.all(farfield_coeffs(m, 0.7, 6).v == 0.0)


@pytest.mark.parametrize("m", [0.7, 3.0])
def test_farfield_residual(m):
    coeffs = farfield_coeffs(m, 1.0, 8)
    assert abs(farfield_residual(coeffs, 100.0)) < 1e-10


def test_farfield_rejects_inf():
    with pytest.raises(DomainError):
        farfield_coeffs(math.inf, 1.0, 4)


# Phase-plane series -------------------------------------------------------

@pytest.mark.parametrize("m", [0.6, 1.0, 2.0, 7.0])
def test_chi_closed_forms(m):
    chi = phase_chi_coeffs(m, 4).chi
    assert chi[0] == pytest.approx(-1.0 / (4.0 * m))
    assert chi[1] == pytest.approx((2.0 * m - 1.0) / (72.0 * m * m))


def test_chi_half_is_parabola():
    chi = phase_chi_coeffs(0.5, 8).chi
    assert chi[0] == pytest.approx(-0.5)
    assert np.all(chi[1:] == 0.0)
    f, df = eval_phase_start(phase_chi_coeffs(0.5, 8), 2.0, 1e-2)
    phi = -2.0 + 1e-2
    assert f == pytest.approx(0.5 * (4.0 - phi * phi), rel=1e-14)
    assert df == pytest.approx(-phi, rel=1e-14)


def test_chi_infinite_is_linear():
    chi = phase_chi_coeffs(math.inf, 6).chi
    assert np.all(chi == 0.0)


@pytest.mark.parametrize("m, B", [(3.0, 3.0), (0.7, 0.9), (5.0, 2.0)])
def test_theta_leading_coefficients(m, B):
    theta = theta_coeffs(m, B, 4).theta
    assert theta[0] == pytest.approx(B * (m - 1) * (m - 2) / (m * (m + 1)), rel=1e-12)
    assert theta[1] == pytest.approx(
        B * B * (m - 1) * (m - 2) * (9 - 3 * m) / (2 * m * m * (m + 1) ** 2), rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("m", [1.0, 2.0])
def test_theta_vanishes_for_exact_cases(m):
    assert np.all(theta_coeffs(m, 1.3, 6).theta == 0.0)
    assert eval_theta(theta_coeffs(m, 1.3, 6), 50.0) == (0.0, 0.0, 0.0)


def test_theta_residual_decays():
    coeffs = theta_coeffs(3.0, 3.0, 8)
    assert abs(theta_residual(coeffs, 1e3)) < 1e-12
    assert abs(theta_residual(coeffs, 1e3)) < abs(theta_residual(coeffs, 1e2))


@pytest.mark.parametrize("order", [0, -1, 2.5])
def test_bad_orders(order):
    with pytest.raises(DomainError):
        lyapunov_coeffs(MValue.finite(1.0), 1.0, order)
