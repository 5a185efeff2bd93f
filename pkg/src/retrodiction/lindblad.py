"""Forward and backward master-equation evolution.

Conventions (hbar = 1):

* predictive:  d rho/dt = -i[H, rho] + sum_q (2 A rho A+ - A+A rho - rho A+A)
  (no factor 1/2 on the sandwich term; rates are absorbed into ``A_q``).
* measurement operator, forward time t:
  d Gamma/dt = -i[H, Gamma] - sum_q (2 A+ Gamma A - Gamma A+A - A+A Gamma)
* retrodictive density: the same plus ``-2 rho Tr(rho sum_q [A+, A])``.

Backward runs are parameterized by the premeasurement time ``tau = t_m - t``
so the grid increases from the measurement; ``d/dtau = -d/dt``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import opalg
from .errors import IntegrationError, OperatorError

logger = logging.getLogger(__name__)

RESYMMETRIZE_EVERY = 100
RESYMMETRIZE_LIMIT = 1e-10
POSITIVITY_ABORT = 1e-7
TARGET_STEP_RATE = 1e-2


class Direction(str, enum.Enum):
    PREDICTIVE_FORWARD = "predictive_forward"
    RETRODICTIVE_BACKWARD = "retrodictive_backward"


class Equation(str, enum.Enum):
    PREDICTIVE = "predictive"
    BACKWARD_MDO = "backward_mdo"
    RETRODICTIVE_NONLINEAR = "retrodictive_nonlinear"

    @property
    def direction(self) -> Direction:
        if self is Equation.PREDICTIVE:
            return Direction.PREDICTIVE_FORWARD
        return Direction.RETRODICTIVE_BACKWARD


@dataclass(frozen=True, eq=False)
class LindbladModel:
    hamiltonian: np.ndarray
    jumps: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        h = opalg.as_operator(self.hamiltonian, "hamiltonian")
        asym = opalg.max_asymmetry(h)
        if asym > opalg.HERMITICITY_TOL:
            raise OperatorError(f"hamiltonian is not Hermitian (asymmetry {asym:.3e})")
        jumps = tuple(opalg.as_operator(a, f"jump operator {q}") for q, a in enumerate(self.jumps))
        for q, a in enumerate(jumps):
            if a.shape != h.shape:
                raise OperatorError(f"jump operator {q} has shape {a.shape}, "
                                    f"hamiltonian has {h.shape}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "_decay", sum((opalg.adjoint(a) @ a for a in jumps),
                                               np.zeros_like(h)))
        object.__setattr__(self, "_imbalance", sum((opalg.commutator(opalg.adjoint(a), a)
                                                    for a in jumps), np.zeros_like(h)))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def decay_operator(self) -> np.ndarray:
        """``sum_q A_q+ A_q``."""
        return self._decay

    @property
    def imbalance_operator(self) -> np.ndarray:
        """``sum_q [A_q+, A_q]``, which drives the nonlinear retrodictive term."""
        return self._imbalance

    @property
    def max_rate(self) -> float:
        """``max(||H||, sum_q ||A_q+ A_q||)`` in spectral norm."""
        h = np.linalg.norm(self.hamiltonian, 2)
        d = sum(np.linalg.norm(opalg.adjoint(a) @ a, 2) for a in self.jumps)
        return float(max(h, d))


@dataclass(frozen=True)
class EvolutionWindow:
    """Uniform grid ``t_start .. t_end`` in ``steps`` intervals.

    For backward runs the times are premeasurement times tau.
    """

    t_start: float
    t_end: float
    steps: int
    direction: Direction = Direction.PREDICTIVE_FORWARD

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.t_end > self.t_start:
            raise ValueError(f"window needs t_end > t_start, got [{self.t_start}, {self.t_end}]")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    def grid(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    @classmethod
    def for_model(cls, model: LindbladModel, t_end: float, t_start: float = 0.0,
                  direction=Direction.PREDICTIVE_FORWARD,
                  step_rate: float = TARGET_STEP_RATE, min_steps: int = 1) -> "EvolutionWindow":
        """Window whose step satisfies ``h * model.max_rate <= step_rate``."""
        return cls(t_start, t_end, suggest_steps(model, t_end - t_start, step_rate, min_steps),
                   direction)


def suggest_steps(model: LindbladModel, span: float, step_rate: float = TARGET_STEP_RATE,
                  min_steps: int = 1) -> int:
    return max(min_steps, int(math.ceil(span * model.max_rate / step_rate)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    window: EvolutionWindow
    times: np.ndarray
    states: np.ndarray
    normalized: bool
    equation: Equation = Equation.PREDICTIVE
    min_eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def time_label(self) -> str:
        if self.window.direction is Direction.RETRODICTIVE_BACKWARD:
            return "tau"
        return "time"

    def __len__(self) -> int:
        return len(self.times)

    def normalize(self) -> "Trajectory":
        """Divide every snapshot by its trace."""
        traces = np.trace(self.states, axis1=1, axis2=2).real
        if np.any(traces <= 0.0):
            k = int(np.argmax(traces <= 0.0))
            raise IntegrationError("snapshot has non-positive trace; cannot normalize", k)
        states = self.states / traces[:, None, None]
        return Trajectory(self.window, self.times, states, True, self.equation,
                          opalg.min_eigenvalues(states))


def predictive_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    h = model.hamiltonian
    if rho.shape != h.shape:
        raise OperatorError(f"state shape {rho.shape} does not match model dimension {model.dim}")
    out = -1j * (h @ rho - rho @ h)
    for a in model.jumps:
        ad = opalg.adjoint(a)
        ada = ad @ a
        out += 2.0 * (a @ rho @ ad) - ada @ rho - rho @ ada
    return out


def backward_mdo_rhs(model: LindbladModel, gamma: np.ndarray) -> np.ndarray:
    """Right-hand side of the measurement-operator equation in forward time t.

    The backward integrator uses ``d Gamma/d tau = -backward_mdo_rhs``.
    """
    h = model.hamiltonian
    if gamma.shape != h.shape:
        raise OperatorError(f"operator shape {gamma.shape} does not match model "
                            f"dimension {model.dim}")
    out = -1j * (h @ gamma - gamma @ h)
    for a in model.jumps:
        ad = opalg.adjoint(a)
        ada = ad @ a
        out -= 2.0 * (ad @ gamma @ a) - gamma @ ada - ada @ gamma
    return out


def retrodictive_rhs(model: LindbladModel, rho: np.ndarray, trace_tol: float = 1e-9) -> np.ndarray:
    """Nonlinear, trace-conserving retrodictive master equation in forward time t."""
    tr = opalg.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise OperatorError(f"retrodictive density must have unit trace, got {tr:.12g}")
    drift = opalg.hs_inner(rho, model.imbalance_operator)
    return backward_mdo_rhs(model, rho) - 2.0 * drift * rho


def superoperator(rhs: Callable[[np.ndarray], np.ndarray], dim: int) -> np.ndarray:
    """Matrix of a linear map on row-major vectorized ``dim x dim`` operators."""
    cols = []
    for k in range(dim * dim):
        basis = np.zeros(dim * dim, dtype=complex)
        basis[k] = 1.0
        cols.append(rhs(basis.reshape(dim, dim)).reshape(-1))
    return np.array(cols).T


def _rk4_linear_step(generator: np.ndarray, h: float) -> np.ndarray:
    # For y' = L y the classic RK4 update collapses to this fixed polynomial in hL.
    n = generator.shape[0]
    hl = h * generator
    hl2 = hl @ hl
    hl3 = hl2 @ hl
    return np.eye(n) + hl + hl2 / 2.0 + hl3 / 6.0 + hl3 @ hl / 24.0


def _resymmetrize(y: np.ndarray, dim: int, step: int) -> np.ndarray:
    m = y.reshape(dim, dim)
    sym = opalg.hermitian_part(m)
    correction = float(np.max(np.abs(sym - m)))
    scale = max(1.0, float(np.max(np.abs(m))))
    logger.debug("step %d: hermiticity correction %.3e", step, correction)
    if correction > RESYMMETRIZE_LIMIT * scale:
        raise IntegrationError(f"hermiticity drift {correction:.3e} exceeds "
                               f"{RESYMMETRIZE_LIMIT:g}", step)
    return sym.reshape(-1)


def _integrate_linear(generator: np.ndarray, y0: np.ndarray, window: EvolutionWindow,
                      dim: int) -> np.ndarray:
    prop = _rk4_linear_step(generator, window.step)
    out = np.empty((window.steps + 1, y0.size), dtype=complex)
    out[0] = y = y0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, window.steps + 1):
            y = prop @ y
            if k % RESYMMETRIZE_EVERY == 0 and np.all(np.isfinite(y)):
                y = _resymmetrize(y, dim, k)
            out[k] = y
    return out


def _integrate_rk4(f: Callable[[np.ndarray], np.ndarray], y0: np.ndarray,
                   window: EvolutionWindow, dim: int) -> np.ndarray:
    h = window.step
    out = np.empty((window.steps + 1, y0.size), dtype=complex)
    out[0] = y = y0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, window.steps + 1):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise IntegrationError("non-finite state during integration", k)
            if k % RESYMMETRIZE_EVERY == 0:
                y = _resymmetrize(y, dim, k)
            out[k] = y
    return out


def _first_nonfinite(flat: np.ndarray) -> int | None:
    bad = ~np.all(np.isfinite(flat), axis=1)
    return int(np.argmax(bad)) if bad.any() else None


def evolve(model: LindbladModel, initial, window: EvolutionWindow,
           equation=Equation.PREDICTIVE, direct: bool = False) -> Trajectory:
    """Integrate one of the three equations on the window grid with classic RK4.

    ``PREDICTIVE`` runs forward in t and needs a unit-trace density operator.
    ``BACKWARD_MDO`` runs in tau and returns the raw (unnormalized) operator.
    ``RETRODICTIVE_NONLINEAR`` runs in tau and returns unit-trace snapshots;
    by default it integrates the linear measurement-operator equation and
    normalizes each snapshot, which is exact because the variable-trace
    substitute of the nonlinear equation obeys the same linear equation.
    Pass ``direct=True`` to integrate the nonlinear equation itself.
    """
    equation = Equation(equation)
    if window.direction is not equation.direction:
        raise ValueError(f"{equation.value} needs a {equation.direction.value} window, "
                         f"got {window.direction.value}")
    rho0 = opalg.as_operator(initial, "initial state")
    if rho0.shape != model.hamiltonian.shape:
        raise OperatorError(f"initial state shape {rho0.shape} does not match model "
                            f"dimension {model.dim}")
    asym = opalg.max_asymmetry(rho0)
    if asym > opalg.HERMITICITY_TOL * max(1.0, float(np.max(np.abs(rho0)))):
        raise OperatorError(f"initial state is not Hermitian (asymmetry {asym:.3e})")
    dim = model.dim
    normalized = equation is not Equation.BACKWARD_MDO
    if normalized:
        tr = opalg.trace(rho0)
        if abs(tr - 1.0) > 1e-9:
            raise OperatorError(f"{equation.value} needs a unit-trace initial state, "
                                f"got trace {tr:.12g}")
        if equation is Equation.RETRODICTIVE_NONLINEAR:
            low = opalg.min_eig_hermitian(rho0).min_eigenvalue
            if low < -opalg.POSITIVITY_TOL:
                raise OperatorError(f"initial retrodictive density has negative "
                                    f"eigenvalue {low:.3e}")

    if equation is Equation.PREDICTIVE:
        gen = superoperator(lambda m: predictive_rhs(model, m), dim)
        flat = _integrate_linear(gen, rho0.reshape(-1), window, dim)
    elif equation is Equation.BACKWARD_MDO or not direct:
        gen = -superoperator(lambda m: backward_mdo_rhs(model, m), dim)
        flat = _integrate_linear(gen, rho0.reshape(-1), window, dim)
    else:
        imbalance_t = model.imbalance_operator.T.reshape(-1)
        gen = -superoperator(lambda m: backward_mdo_rhs(model, m), dim)

        def f(y):
            # d/dtau flips the sign of the whole forward-time right-hand side
            drift = np.dot(y, imbalance_t)
            return gen @ y + 2.0 * drift * y

        flat = _integrate_rk4(f, rho0.reshape(-1), window, dim)

    bad = _first_nonfinite(flat)
    if bad is not None:
        raise IntegrationError("non-finite state during integration", bad)
    states = flat.reshape(-1, dim, dim)
    traj = Trajectory(window, window.grid(), states, False, equation)
    if equation is Equation.RETRODICTIVE_NONLINEAR and not direct:
        traj = traj.normalize()
    elif normalized:
        traj = Trajectory(window, traj.times, states, True, equation,
                          opalg.min_eigenvalues(states))
    if traj.normalized:
        k = int(np.argmin(traj.min_eigenvalues))
        if traj.min_eigenvalues[k] < -POSITIVITY_ABORT:
            raise IntegrationError(f"positivity violated: eigenvalue "
                                   f"{traj.min_eigenvalues[k]:.3e}; step too large or "
                                   "invalid model", k)
    return traj


def unitary_evolve(hamiltonian, op, t: float, direction: str = "schrodinger_forward") -> np.ndarray:
    """``U op U+`` (``schrodinger_forward``) or ``U+ op U`` (``heisenberg_backward``).

    ``U = exp(-i H t)`` from the eigendecomposition of the Hermitian ``H``.
    """
    h = opalg.as_operator(hamiltonian, "hamiltonian")
    m = opalg.as_operator(op, "operator")
    if h.shape != m.shape:
        raise OperatorError(f"dimension mismatch: {h.shape} vs {m.shape}")
    if opalg.max_asymmetry(h) > opalg.HERMITICITY_TOL:
        raise OperatorError("hamiltonian is not Hermitian")
    if direction not in ("schrodinger_forward", "heisenberg_backward"):
        raise ValueError(f"unknown direction {direction!r}")
    if t == 0:
        return m.copy()
    energies, vecs = np.linalg.eigh(opalg.hermitian_part(h))
    u = (vecs * np.exp(-1j * energies * t)) @ vecs.conj().T
    if direction == "schrodinger_forward":
        return u @ m @ u.conj().T
    return u.conj().T @ m @ u


def collapse_invariant(model: LindbladModel, rho0, gamma_final,
                       window: EvolutionWindow) -> list[float]:
    """``Tr[rho(t) Gamma(t)]`` on every grid point of ``window``.

    ``rho`` is evolved forward from ``t_start`` (preparation) and ``Gamma``
    backward from ``t_end`` (measurement) on the same grid.
    """
    if window.direction is not Direction.PREDICTIVE_FORWARD:
        raise ValueError("collapse_invariant takes a predictive_forward window")
    forward = evolve(model, rho0, window, Equation.PREDICTIVE)
    back_window = EvolutionWindow(0.0, window.t_end - window.t_start, window.steps,
                                  Direction.RETRODICTIVE_BACKWARD)
    g = opalg.as_operator(gamma_final, "measurement operator")
    backward = evolve(model, g, back_window, Equation.BACKWARD_MDO)
    gammas = backward.states[::-1]
    vals = np.einsum("kab,kba->k", forward.states, gammas)
    scale = float(np.linalg.norm(g))
    return [opalg.real_scalar(complex(v), scale=scale, tol=1e-10, what="Tr[rho Gamma]")
            for v in vals]


def relative_spread(values: Sequence[float]) -> float:
    vals = np.asarray(values, dtype=float)
    return float((vals.max() - vals.min()) / abs(vals.mean()))
