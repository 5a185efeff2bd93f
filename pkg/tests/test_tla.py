import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from retrodiction import opalg
from retrodiction.devices import DeviceKind, build_device_set, device_from_states
from retrodiction.errors import OperatorError
from retrodiction.lindblad import Direction, Equation, EvolutionWindow, evolve, predictive_rhs
from retrodiction.tla import (DETECTION_BLOCH, BlochState, DetectionEvent, KET_E, KET_G,
                              KET_MINUS, KET_PLUS, SIGMA_1, SIGMA_MINUS, TwoLevelParams,
                              analytic_bloch, bloch_compose, bloch_decompose, damped_kernels,
                              detection, detection_operator, excited_matrix_elements,
                              preparation_probabilities, tla_model)

P_E, P_G, P_PLUS = (opalg.projector(k) for k in (KET_E, KET_G, KET_PLUS))
PREP = DeviceKind.PREPARATION
BACK = Direction.RETRODICTIVE_BACKWARD


def test_model_construction():
    zero = tla_model(TwoLevelParams(0.0, 0.0))
    assert np.all(zero.hamiltonian == 0) and np.all(zero.jumps[0] == 0)
    m = tla_model(TwoLevelParams(2.0, 1.0))
    np.testing.assert_array_equal(m.hamiltonian, SIGMA_1)
    np.testing.assert_array_equal(m.jumps[0], SIGMA_MINUS)
    with pytest.raises(ValueError):
        TwoLevelParams(-1.0, 1.0)


@pytest.mark.parametrize("big_v, gamma", [(2.0, 1.0), (0.7, 0.3)])
def test_predictive_rhs_by_hand(big_v, gamma):
    # hand evaluation on |e><e|: populations flow at 2 gamma, drive enters the coherence
    d = predictive_rhs(tla_model(TwoLevelParams(big_v, gamma)), P_E)
    expected = np.array([[-2 * gamma, 0.5j * big_v], [-0.5j * big_v, 2 * gamma]])
    np.testing.assert_allclose(d, expected, atol=1e-15)


@pytest.mark.parametrize("op, expected", [
    (P_E, (0, 0, 0.5, 0.5)), (np.eye(2) / 2, (0, 0, 0, 0.5)), (P_PLUS, (0.5, 0, 0, 0.5))])
def test_bloch_decompose_examples(op, expected):
    b = bloch_decompose(op)
    assert (b.u, b.v, b.w, b.x) == pytest.approx(expected, abs=1e-15)
    np.testing.assert_allclose(bloch_compose(b), op, atol=1e-15)


def test_bloch_decompose_rejects_non_hermitian():
    with pytest.raises(OperatorError):
        bloch_decompose(SIGMA_MINUS)


def test_analytic_examples():
    b = analytic_bloch(BlochState(1, 0, 0, 1), math.log(2), TwoLevelParams(3.3, 1.0))
    assert b.u == pytest.approx(0.5, abs=1e-15)
    b0 = BlochState(0.1, -0.2, 0.3, 0.7)
    b = analytic_bloch(b0, 0.0, TwoLevelParams(2.0, 1.0))
    assert (b.u, b.v, b.w, b.x) == pytest.approx((0.1, -0.2, 0.3, 0.7), abs=1e-15)
    params, w0 = TwoLevelParams(2.0, 1.0), 0.5
    taus = np.linspace(0, 5, 101)
    om = math.sqrt(params.omega_squared)
    v = analytic_bloch(BlochState(0, 0, w0, w0), taus, params).v
    np.testing.assert_allclose(v, w0 * np.exp(-1.5 * taus) * (2.0 / om) * np.sin(om * taus),
                               atol=1e-15)


def test_analytic_errors():
    with pytest.raises(ValueError):
        analytic_bloch(BlochState(0, 0, 0.5, 0.5), 1.0, TwoLevelParams(0.0, 0.0))
    with pytest.raises(ValueError):
        analytic_bloch(BlochState(0, 0, 0.5, 0.5), -1.0, TwoLevelParams(1.0, 1.0))


def integrate_bloch(b0, params, tau, steps):
    traj = evolve(tla_model(params), bloch_compose(b0), EvolutionWindow(0, tau, steps, BACK),
                  Equation.BACKWARD_MDO)
    return bloch_decompose(opalg.hermitian_part(traj.states[-1]))


def test_analytic_matches_integrator_at_point():
    params, b0 = TwoLevelParams(2.0, 1.0), BlochState(0.3, -0.4, 0.2, 0.9)
    b = analytic_bloch(b0, 0.7, params)
    n = integrate_bloch(b0, params, 0.7, 700)
    assert (n.u, n.v, n.w, n.x) == pytest.approx((b.u, b.v, b.w, b.x), abs=1e-8)


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0.01, 10),
       st.tuples(*[st.floats(-1, 1)] * 4))
def test_analytic_oracle_random(big_v, gamma, tau, coeffs):
    if 2 * gamma ** 2 + big_v ** 2 < 1e-6:
        return
    params = TwoLevelParams(big_v, gamma)
    b0 = BlochState(*coeffs)
    steps = max(20, math.ceil(tau * tla_model(params).max_rate / 5e-3))
    n = integrate_bloch(b0, params, tau, steps)
    b = analytic_bloch(b0, tau, params)
    assert max(abs(p - q) for p, q in zip((n.u, n.v, n.w, n.x), (b.u, b.v, b.w, b.x))) <= 1e-8


@given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0.1, 8))
def test_x_derivative_finite_difference(big_v, gamma, tau):
    params, b0, h = TwoLevelParams(big_v, gamma), BlochState(0.2, 0.1, 0.5, 0.6), 1e-5
    fd = (analytic_bloch(b0, tau + h, params).x - analytic_bloch(b0, tau - h, params).x) / (2 * h)
    exact = -2 * gamma * analytic_bloch(b0, tau, params).w
    # relative to the derivative's own scale on this trajectory
    scale = max(abs(exact), 2 * gamma * abs(b0.w) * 1e-3)
    assert abs(fd - exact) <= 1e-6 * scale


@given(st.floats(0.1, 5), st.floats(0, 10))
def test_branch_continuity(gamma, tau):
    b0 = BlochState(0.1, 0.3, 0.5, 0.9)
    lo = analytic_bloch(b0, tau, TwoLevelParams(gamma / 2 - 1e-8, gamma))
    hi = analytic_bloch(b0, tau, TwoLevelParams(gamma / 2 + 1e-8, gamma))
    assert max(abs(p - q) for p, q in zip((lo.u, lo.v, lo.w, lo.x), (hi.u, hi.v, hi.w, hi.x))) <= 1e-6


def test_kernels_taylor_matches_trig():
    params = TwoLevelParams(1.0, 0.0)
    c, s = damped_kernels(params, np.array([5e-5, 2e-4]))
    np.testing.assert_allclose(c, np.cos([5e-5, 2e-4]), rtol=1e-15)
    np.testing.assert_allclose(s, np.sin([5e-5, 2e-4]), rtol=1e-15)


def test_overdamped_kernels_stay_finite_at_long_times():
    c, s = damped_kernels(TwoLevelParams(0.01, 5.0), np.array([500.0]))
    assert np.isfinite(c).all() and np.isfinite(s).all()


def test_plus_detection_closed_form():
    taus = np.linspace(0, 10, 1001)
    for big_v, gamma in [(2.0, 1.0), (0.2, 1.3), (0.65, 1.3)]:
        rho = detection("plus_superposition", taus, TwoLevelParams(big_v, gamma))
        np.testing.assert_allclose(rho[:, 0, 1], np.exp(-gamma * taus) / 2, atol=1e-15)
        assert np.all(rho[:, 0, 0].real == 0.5)
    rho = detection("plus_superposition", math.log(2), TwoLevelParams(3.0, 1.0))
    assert rho[0, 1].real == pytest.approx(0.25)


def test_excited_detection_examples():
    params = TwoLevelParams(2.0, 1.0)
    np.testing.assert_array_equal(detection("excited", 0.0, params), P_E)
    rho = detection("excited", 20.0, params)
    assert rho[0, 0].real == pytest.approx(0.5, abs=1e-6)
    assert rho[1, 1].real == pytest.approx(0.5, abs=1e-6)
    eg, ee = excited_matrix_elements(0.5, params)
    rho = detection("excited", 0.5, params)
    assert eg == pytest.approx(rho[0, 1], abs=1e-8)
    assert ee == pytest.approx(rho[0, 0].real, abs=1e-8)
    traj = evolve(tla_model(params), P_E, EvolutionWindow(0, 0.5, 500, BACK),
                  Equation.RETRODICTIVE_NONLINEAR)
    np.testing.assert_allclose(traj.states[-1], rho, atol=1e-8)


def test_excited_elements_singular_at_critical_drive():
    with pytest.raises(ZeroDivisionError):
        excited_matrix_elements(1.0, TwoLevelParams(0.5, 1.0))


@pytest.mark.parametrize("event", list(DetectionEvent))
@pytest.mark.parametrize("big_v, gamma", [(0.4, 1.0), (0.5, 1.0), (2.0, 1.0)])
def test_detection_is_valid_density(event, big_v, gamma):
    rho = detection(event, np.linspace(0, 40, 801), TwoLevelParams(big_v, gamma))
    np.testing.assert_allclose(np.trace(rho, axis1=1, axis2=2), 1.0, atol=1e-12)
    assert opalg.min_eigenvalues(rho).min() >= -1e-10


def test_ground_detection_matches_integrator():
    params = TwoLevelParams(2.0, 1.0)
    traj = evolve(tla_model(params), detection_operator("ground"),
                  EvolutionWindow(0, 10, 10000, BACK), Equation.RETRODICTIVE_NONLINEAR)
    np.testing.assert_allclose(detection("ground", traj.times, params), traj.states, atol=1e-8)


def test_sigma2_detection_oscillates():
    params = TwoLevelParams(5.0, 1.0)
    assert DETECTION_BLOCH[DetectionEvent.SIGMA2_SUPERPOSITION].v != 0
    om = math.sqrt(params.omega_squared)
    taus = np.linspace(1e-6, 2 * math.pi / om, 2000)
    v = analytic_bloch(DETECTION_BLOCH[DetectionEvent.SIGMA2_SUPERPOSITION], taus, params).v
    assert np.any(np.diff(np.sign(v)) != 0)


def test_preparation_probability_examples():
    prep = build_device_set(PREP, ["e", "g"], [0.3 * P_E, 0.7 * P_G])
    assert dict(preparation_probabilities(np.eye(2) / 2, prep)) == pytest.approx(
        {"e": 0.3, "g": 0.7})
    pm = device_from_states(PREP, ["+", "-"], [KET_PLUS, KET_MINUS], [0.5, 0.5])
    for tau in (0.0, 0.4, 3.0):
        got = dict(preparation_probabilities(
            detection("plus_superposition", tau, TwoLevelParams(2.0, 1.0)), pm))
        assert got["+"] == pytest.approx((1 + math.exp(-tau)) / 2, abs=1e-8)
        assert got["-"] == pytest.approx((1 - math.exp(-tau)) / 2, abs=1e-8)
    got = dict(preparation_probabilities(detection("excited", 30.0, TwoLevelParams(2.0, 1.0)),
                                         prep))
    assert got["e"] == pytest.approx(0.3, abs=1e-6)
    with pytest.raises(OperatorError):
        preparation_probabilities(np.eye(2), prep)
