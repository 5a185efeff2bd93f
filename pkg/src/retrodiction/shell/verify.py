"""Built-in verification suites: analytic oracle, Bayes equivalence, invariants."""

from __future__ import annotations

import time

import numpy as np

from .. import opalg
from ..devices import DeviceKind, a_priori_probability, build_device_set, predictive_density
from ..lindblad import (Direction, Equation, EvolutionWindow, LindbladModel, collapse_invariant,
                        evolve, relative_spread, suggest_steps, unitary_evolve)
from ..probcalc import bayes_retrodiction, retrodictive_conditional
from ..random_models import random_density, random_device, random_hamiltonian, random_model
from ..tla import (DETECTION_BLOCH, BlochState, DetectionEvent, TwoLevelParams, analytic_bloch,
                   bloch_compose, bloch_decompose, detection, detection_operator,
                   excited_matrix_elements, tla_model)
from .runner import CheckResult, RunReport, _check

SUITES = ("analytic", "bayes", "invariants", "all")

ANALYTIC_TOL = 1e-8
BAYES_TOL = 1e-6
BAYES_STATIC_TOL = 1e-12
POSITIVITY_FLOOR = -1e-9
TRACE_TOL = 1e-9
FIXED_POINT_TOL = 1e-12
COLLAPSE_TOL = 1e-7
NONLINEAR_TOL = 1e-6
STEADY_TOL = 1e-6
CLOSED_TOL = 1e-8
BRANCH_TOL = 1e-6
X_DERIVATIVE_TOL = 1e-6


def _backward_window(model: LindbladModel, tau_end: float, step_rate: float = 1e-2,
                     min_steps: int = 10) -> EvolutionWindow:
    return EvolutionWindow.for_model(model, tau_end, direction=Direction.RETRODICTIVE_BACKWARD,
                                     step_rate=step_rate, min_steps=min_steps)


def _bloch_stack(states: np.ndarray) -> np.ndarray:
    """``(N, 4)`` array of (u, v, w, x) for a stack of 2x2 operators."""
    u = states[:, 0, 1].real + states[:, 1, 0].real
    v = states[:, 1, 0].imag - states[:, 0, 1].imag
    w = states[:, 0, 0].real - states[:, 1, 1].real
    x = states[:, 0, 0].real + states[:, 1, 1].real
    return 0.5 * np.stack([u, v, w, x], axis=1)


def numeric_vs_analytic(b0: BlochState, params: TwoLevelParams, tau_end: float,
                        step_rate: float = 1e-2) -> float:
    """Worst coefficient gap between integrated and closed-form backward evolution."""
    model = tla_model(params)
    window = _backward_window(model, tau_end, step_rate)
    traj = evolve(model, bloch_compose(b0), window, Equation.BACKWARD_MDO)
    b = analytic_bloch(b0, traj.times, params)
    exact = np.stack([np.broadcast_to(c, traj.times.shape) for c in (b.u, b.v, b.w, b.x)], axis=1)
    return float(np.max(np.abs(_bloch_stack(traj.states) - exact)))


def analytic_suite(seed: int = 42) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    checks = []

    worst = 0.0
    for _ in range(200):
        big_v, gamma = rng.uniform(0.0, 5.0, 2)
        tau = rng.uniform(0.0, 10.0)
        b0 = BlochState(*rng.uniform(-1.0, 1.0, 4))
        if tau < 1e-9 or 2 * gamma ** 2 + big_v ** 2 < 1e-12:
            continue
        worst = max(worst, numeric_vs_analytic(b0, TwoLevelParams(big_v, gamma), tau,
                                                step_rate=5e-3))
    checks.append(_check("analytic_bloch vs integrator (200 random)", worst, ANALYTIC_TOL))

    worst = 0.0
    for event in DetectionEvent:
        for big_v, gamma in [(2.0, 1.0), (0.4, 1.0), (0.5, 1.0), (5.0, 0.3)]:
            params = TwoLevelParams(big_v, gamma)
            model = tla_model(params)
            traj = evolve(model, detection_operator(event), _backward_window(model, 10.0),
                          Equation.RETRODICTIVE_NONLINEAR)
            worst = max(worst, float(np.max(np.abs(detection(event, traj.times, params)
                                                   - traj.states))))
    checks.append(_check("detection events vs integrator", worst, ANALYTIC_TOL))

    worst = 0.0
    taus = np.linspace(0.0, 10.0, 2001)
    for big_v, gamma in [(2.0, 1.0), (0.4, 1.0), (3.0, 0.5)]:
        params = TwoLevelParams(big_v, gamma)
        eg, ee = excited_matrix_elements(taus, params)
        rho = detection(DetectionEvent.EXCITED, taus, params)
        worst = max(worst, float(np.max(np.abs(eg - rho[:, 0, 1]))),
                    float(np.max(np.abs(ee - rho[:, 0, 0].real))))
    checks.append(_check("closed-form excited-state elements vs analytic_bloch", worst, ANALYTIC_TOL))

    worst = 0.0
    for gamma in (0.5, 1.0, 3.0):
        for b0 in (DETECTION_BLOCH[DetectionEvent.EXCITED],
                   DETECTION_BLOCH[DetectionEvent.SIGMA2_SUPERPOSITION]):
            lo = analytic_bloch(b0, taus, TwoLevelParams(gamma / 2 - 1e-8, gamma))
            hi = analytic_bloch(b0, taus, TwoLevelParams(gamma / 2 + 1e-8, gamma))
            mid = analytic_bloch(b0, taus, TwoLevelParams(gamma / 2, gamma))
            for a, b in ((lo, hi), (lo, mid), (mid, hi)):
                worst = max(worst, max(float(np.max(np.abs(np.subtract(p, q))))
                                       for p, q in zip((a.u, a.v, a.w, a.x), (b.u, b.v, b.w, b.x))))
    checks.append(_check("branch continuity at V = gamma/2", worst, BRANCH_TOL))

    worst = 0.0
    delta = 1e-5
    for big_v, gamma in [(2.0, 1.0), (0.3, 1.0), (0.5, 1.0)]:
        params = TwoLevelParams(big_v, gamma)
        b0 = BlochState(0.2, -0.3, 0.4, 0.6)
        t = np.linspace(0.1, 8.0, 400)
        fd = (analytic_bloch(b0, t + delta, params).x - analytic_bloch(b0, t - delta, params).x) / (2 * delta)
        exact = -2.0 * gamma * analytic_bloch(b0, t, params).w
        worst = max(worst, float(np.max(np.abs(fd - exact)) / np.max(np.abs(exact))))
    checks.append(_check("dx/dtau = -2 gamma w (finite difference)", worst, X_DERIVATIVE_TOL))
    return checks


def _bayes_pair_gap(model, prep, meas, tau: float) -> float:
    if tau == 0.0:
        evolved_meas = list(meas.ops)
        evolved_pred = None
    else:
        window = _backward_window(model, tau)
        evolved_meas = [evolve(model, g, window, Equation.BACKWARD_MDO).states[-1] for g in meas.ops]
        fwd = EvolutionWindow(0.0, tau, window.steps)
        evolved_pred = []
        for label in prep.labels:
            rho = predictive_density(prep, label)
            evolved_pred.append(evolve(model, rho, fwd, Equation.PREDICTIVE).states[-1])
    worst = 0.0
    for j in meas.labels:
        for i in prep.labels:
            a = retrodictive_conditional(prep, meas, j, i, evolved_meas=evolved_meas)
            b = bayes_retrodiction(prep, meas, j, i, evolved_pred=evolved_pred)
            worst = max(worst, abs(a - b))
    return worst


def bayes_suite(seed: int = 42) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    evolved_gap, static_gap = 0.0, 0.0
    for k in range(100):
        dim = int(rng.integers(2, 5))
        model = random_model(rng, dim)
        prep = random_device(rng, DeviceKind.PREPARATION, dim, int(rng.integers(2, 4)))
        meas = random_device(rng, DeviceKind.MEASUREMENT, dim, int(rng.integers(2, 4)),
                             unbiased=bool(k % 2))
        evolved_gap = max(evolved_gap, _bayes_pair_gap(model, prep, meas, rng.uniform(0.2, 3.0)))
        static_gap = max(static_gap, _bayes_pair_gap(model, prep, meas, 0.0))

    params = TwoLevelParams(2.0, 1.0)
    prep = build_device_set(DeviceKind.PREPARATION, ["e", "g"],
                            [0.3 * detection_operator("excited"), 0.7 * detection_operator("ground")])
    meas = build_device_set(DeviceKind.MEASUREMENT, ["excited"], [detection_operator("excited")])
    tla_gap = _bayes_pair_gap(tla_model(params), prep, meas, 1.0)
    return [
        _check("retrodictive vs Bayes, evolved (100 random)", evolved_gap, BAYES_TOL),
        _check("retrodictive vs Bayes, no evolution (100 random)", static_gap, BAYES_STATIC_TOL),
        _check("retrodictive vs Bayes, two-level excited detection", tla_gap, BAYES_TOL),
    ]


def invariants_suite(seed: int = 42) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    floor, trace_dev, fixed_dev, nonlin_dev = np.inf, 0.0, 0.0, 0.0
    for _ in range(30):
        dim = int(rng.integers(2, 5))
        model = random_model(rng, dim)
        fwd = EvolutionWindow.for_model(model, 5.0)
        pred = evolve(model, random_density(rng, dim, rank=1), fwd, Equation.PREDICTIVE)
        trace_dev = max(trace_dev, float(np.max(np.abs(np.trace(pred.states, axis1=1, axis2=2) - 1))))
        back = _backward_window(model, 5.0)
        gamma0 = random_density(rng, dim, rank=1)
        retr = evolve(model, gamma0, back, Equation.RETRODICTIVE_NONLINEAR)
        direct = evolve(model, gamma0, back, Equation.RETRODICTIVE_NONLINEAR, direct=True)
        floor = min(floor, float(np.min(pred.min_eigenvalues)), float(np.min(retr.min_eigenvalues)),
                    float(np.min(direct.min_eigenvalues)))
        nonlin_dev = max(nonlin_dev, float(np.max(np.abs(retr.states - direct.states))))
        ident = evolve(model, np.eye(dim), _backward_window(model, 10.0), Equation.BACKWARD_MDO)
        fixed_dev = max(fixed_dev, float(np.max(np.abs(ident.states - np.eye(dim)))))

    params = TwoLevelParams(2.0, 1.0)
    model = tla_model(params)
    window = _backward_window(model, 10.0)
    lin = evolve(model, detection_operator("excited"), window, Equation.RETRODICTIVE_NONLINEAR)
    direct = evolve(model, detection_operator("excited"), window, Equation.RETRODICTIVE_NONLINEAR,
                    direct=True)
    nonlin_dev = max(nonlin_dev, float(np.max(np.abs(lin.states - direct.states))))
    ident = evolve(model, np.eye(2), window, Equation.BACKWARD_MDO)
    fixed_dev = max(fixed_dev, float(np.max(np.abs(ident.states - np.eye(2)))))

    spread = 0.0
    for _ in range(50):
        dim = int(rng.integers(2, 5))
        model = random_model(rng, dim)
        vals = collapse_invariant(model, random_density(rng, dim), random_density(rng, dim),
                                  EvolutionWindow.for_model(model, 5.0, step_rate=1e-3))
        spread = max(spread, relative_spread(vals))

    steady = 0.0
    for _ in range(10):
        params = TwoLevelParams(rng.uniform(0.0, 5.0), 1.0)
        model = tla_model(params)
        traj = evolve(model, random_density(rng, 2), _backward_window(model, 30.0),
                      Equation.RETRODICTIVE_NONLINEAR)
        steady = max(steady, float(np.max(np.abs(traj.states[-1] - np.eye(2) / 2))))

    closed = 0.0
    for _ in range(10):
        dim = int(rng.integers(2, 5))
        h = random_hamiltonian(rng, dim)
        model = LindbladModel(h)
        span = 20.0 / np.linalg.norm(h, 2)
        rho0 = random_density(rng, dim)
        traj = evolve(model, rho0, EvolutionWindow.for_model(model, span, step_rate=1e-3),
                      Equation.PREDICTIVE)
        exact = unitary_evolve(h, rho0, span)
        closed = max(closed, float(np.max(np.abs(traj.states[-1] - exact))))

    return [
        _check("positivity floor (normalized trajectories)", floor, POSITIVITY_FLOOR, upper=False),
        _check("predictive trace preservation", trace_dev, TRACE_TOL),
        _check("identity fixed point", fixed_dev, FIXED_POINT_TOL),
        _check("collapse-time invariance (50 random)", spread, COLLAPSE_TOL),
        _check("nonlinear vs normalized linear", nonlin_dev, NONLINEAR_TOL),
        _check("retrodictive steady state at 30/gamma", steady, STEADY_TOL),
        _check("closed system vs unitary", closed, CLOSED_TOL),
    ]


def verify(suite: str = "all", seed: int = 42) -> RunReport:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    start = time.perf_counter()
    report = RunReport(scenario=f"verify {suite} (seed {seed})")
    runners = {"analytic": analytic_suite, "bayes": bayes_suite, "invariants": invariants_suite}
    for name, fn in runners.items():
        if suite in (name, "all"):
            report.checks += [CheckResult(f"{name}: {c.name}", c.passed, c.worst, c.tol, c.detail)
                              for c in fn(seed)]
    report.wall_time = time.perf_counter() - start
    return report
