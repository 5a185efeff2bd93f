import numpy as np
import pytest
from hypothesis import given, strategies as st

from retrodiction import opalg
from retrodiction.devices import (DeviceKind, a_priori_probability, build_device_set,
                                  is_unbiased, no_information, pom_elements, predictive_density)
from retrodiction.errors import ProbabilityError
from retrodiction.lindblad import Equation, EvolutionWindow, Direction, evolve
from retrodiction.probcalc import (bayes_retrodiction, joint_table, predictive_conditional,
                                   retrodict_from_operator, retrodictive_conditional)
from retrodiction.random_models import random_device, random_model
from retrodiction.tla import KET_E, KET_G, KET_MINUS, KET_PLUS, TwoLevelParams, detection, tla_model

P_E, P_G, P_PLUS, P_MINUS = (opalg.projector(k) for k in (KET_E, KET_G, KET_PLUS, KET_MINUS))
PREP, MEAS = DeviceKind.PREPARATION, DeviceKind.MEASUREMENT
EG_PREP = build_device_set(PREP, ["e", "g"], [P_E / 2, P_G / 2])
EG_MEAS = build_device_set(MEAS, ["e", "g"], [P_E / 2, P_G / 2])
PM_MEAS = build_device_set(MEAS, ["+", "-"], [P_PLUS / 2, P_MINUS / 2])


def biased(p):
    return build_device_set(PREP, ["e", "g"], [p * P_E, (1 - p) * P_G])


def test_joint_orthogonal_projectors():
    t = joint_table(EG_PREP, EG_MEAS)
    np.testing.assert_allclose(t.joint, [[0.5, 0], [0, 0.5]])
    np.testing.assert_allclose(t.prep_marginal, [0.5, 0.5])


def test_joint_no_information_column():
    t = joint_table(EG_PREP, no_information(2))
    np.testing.assert_allclose(t.joint[:, 0], [0.5, 0.5])


def test_joint_biased_plus_minus():
    t = joint_table(biased(0.3), PM_MEAS)
    assert t.joint[0, 0] == pytest.approx(0.15, abs=1e-15)


def test_joint_csv_layout():
    text = joint_table(EG_PREP, EG_MEAS).to_csv().splitlines()
    assert text[0] == "prep,e,g"
    assert text[1] == "e,0.5,0.0"


def test_predictive_conditional_examples():
    e_only = build_device_set(PREP, ["e"], [P_E])
    assert predictive_conditional(e_only, "e", EG_MEAS, "e") == pytest.approx(1.0)
    assert predictive_conditional(e_only, "e", PM_MEAS, "+") == pytest.approx(0.5)
    ident = list(EG_MEAS.ops)
    assert predictive_conditional(e_only, "e", EG_MEAS, "e", evolved_meas=ident) == 1.0


def test_retrodictive_conditional_examples():
    prep = biased(0.3)
    nothing = no_information(2)
    assert retrodictive_conditional(prep, nothing, "none", "e") == pytest.approx(0.3, abs=1e-12)
    e_meas = build_device_set(MEAS, ["j"], [P_E])
    assert retrodictive_conditional(EG_PREP, e_meas, "j", "e") == pytest.approx(1.0)


def test_biased_prep_from_excited_detection():
    p, params, tau = 0.3, TwoLevelParams(2.0, 1.0), 0.8
    rho = detection("excited", tau, params)
    got = retrodictive_conditional(biased(p), EG_MEAS, "e", "e", rho_retr=rho)
    ee = rho[0, 0].real
    assert got == pytest.approx(p * ee / (p * ee + (1 - p) * (1 - ee)), abs=1e-14)


def test_bayes_static_equality_and_flat_prior():
    for j in ("+", "-"):
        for i in ("e", "g"):
            a = retrodictive_conditional(biased(0.3), PM_MEAS, j, i)
            assert bayes_retrodiction(biased(0.3), PM_MEAS, j, i) == pytest.approx(a, abs=1e-12)
    # flat prior: P(i|j) = P(j|i) / sum_i' P(j|i')
    pji = {i: predictive_conditional(EG_PREP, i, PM_MEAS, "+") for i in ("e", "g")}
    assert bayes_retrodiction(EG_PREP, PM_MEAS, "+", "e") == pytest.approx(
        pji["e"] / sum(pji.values()))


def test_bayes_tla_excited_detection():
    params = TwoLevelParams(2.0, 1.0)
    model, tau = tla_model(params), 1.0
    prep = biased(0.3)
    meas = build_device_set(MEAS, ["x"], [P_E])
    back = EvolutionWindow(0, tau, 1000, Direction.RETRODICTIVE_BACKWARD)
    gam = [evolve(model, P_E, back, Equation.BACKWARD_MDO).states[-1]]
    pred = [evolve(model, predictive_density(prep, i), EvolutionWindow(0, tau, 1000),
                   Equation.PREDICTIVE).states[-1] for i in prep.labels]
    for i in prep.labels:
        a = retrodictive_conditional(prep, meas, "x", i, evolved_meas=gam)
        b = bayes_retrodiction(prep, meas, "x", i, evolved_pred=pred)
        assert a == pytest.approx(b, abs=1e-6)


def test_impossible_outcome():
    e_only = build_device_set(PREP, ["e"], [P_E])
    g_meas = build_device_set(MEAS, ["g"], [P_G])
    with pytest.raises(ProbabilityError, match="impossible"):
        retrodictive_conditional(e_only, g_meas, "g", "e")
    with pytest.raises(ProbabilityError):
        bayes_retrodiction(e_only, g_meas, "g", "e")
    with pytest.raises(ProbabilityError):
        retrodict_from_operator(e_only, "e", np.eye(3))


def test_dimension_mismatch():
    with pytest.raises(ProbabilityError, match="dimensions"):
        joint_table(EG_PREP, no_information(3))


seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(2, 4))
def test_conditional_invariants(seed, dim):
    rng = np.random.default_rng(seed)
    prep = random_device(rng, PREP, dim, int(rng.integers(1, 4)))
    meas = random_device(rng, MEAS, dim, int(rng.integers(1, 4)), unbiased=bool(seed % 2))
    for j in meas.labels:
        total = sum(retrodictive_conditional(prep, meas, j, i) for i in prep.labels)
        assert abs(total - 1) <= 1e-10
        for i in prep.labels:
            a = retrodictive_conditional(prep, meas, j, i)
            assert abs(a - bayes_retrodiction(prep, meas, j, i)) <= 1e-12
    for i in prep.labels:
        assert abs(retrodictive_conditional(prep, no_information(dim), "none", i)
                   - a_priori_probability(prep, i)) <= 1e-12
    if is_unbiased(meas):
        pom = pom_elements(meas)
        for i in prep.labels:
            rho = predictive_density(prep, i)
            for j, el in zip(meas.labels, pom.elements):
                assert abs(predictive_conditional(prep, i, meas, j)
                           - np.trace(rho @ el).real) <= 1e-12


@given(seeds, st.integers(2, 3), st.floats(0.1, 2.0))
def test_evolved_bayes_consistency(seed, dim, tau):
    rng = np.random.default_rng(seed)
    model = random_model(rng, dim)
    prep = random_device(rng, PREP, dim, 2)
    meas = random_device(rng, MEAS, dim, 2)
    steps = 400
    back = EvolutionWindow(0, tau, steps, Direction.RETRODICTIVE_BACKWARD)
    gam = [evolve(model, g, back, Equation.BACKWARD_MDO).states[-1] for g in meas.ops]
    pred = [evolve(model, predictive_density(prep, i), EvolutionWindow(0, tau, steps),
                   Equation.PREDICTIVE).states[-1] for i in prep.labels]
    for j in meas.labels:
        for i in prep.labels:
            assert abs(retrodictive_conditional(prep, meas, j, i, evolved_meas=gam)
                       - bayes_retrodiction(prep, meas, j, i, evolved_pred=pred)) <= 1e-6
