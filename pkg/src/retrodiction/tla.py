"""Resonantly driven two-level atom with spontaneous emission.

Basis ordering is ``(|e>, |g>)`` so ``sigma_3 = diag(1, -1)`` and
``rho[0, 1] = <e|rho|g>``. The model is ``H = (V/2)(sigma_+ + sigma_-)`` with
a single jump operator ``sqrt(gamma) sigma_-``.

Backward evolution of ``B(tau) = u s1 + v s2 + w s3 + x 1`` reduces to

    du/dtau = -gamma u
    dv/dtau = -gamma v + V w
    dw/dtau = -V v - 2 gamma w
    dx/dtau = -2 gamma w

whose closed-form solution is :func:`analytic_bloch`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import opalg
from .devices import DeviceSet
from .errors import OperatorError
from .lindblad import LindbladModel
from .probcalc import retrodict_from_operator

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_1 = SIGMA_PLUS + SIGMA_MINUS
SIGMA_2 = -1j * (SIGMA_PLUS - SIGMA_MINUS)
SIGMA_3 = 2 * SIGMA_PLUS @ SIGMA_MINUS - np.eye(2)

KET_E = np.array([1, 0], dtype=complex)
KET_G = np.array([0, 1], dtype=complex)
KET_PLUS = (KET_E + KET_G) / math.sqrt(2)
KET_MINUS = (KET_E - KET_G) / math.sqrt(2)
KET_PLUS_I = (KET_E + 1j * KET_G) / math.sqrt(2)

TAYLOR_SWITCH = 1e-4


@dataclass(frozen=True)
class TwoLevelParams:
    V: float
    gamma: float

    def __post_init__(self):
        if not (self.V >= 0.0 and self.gamma >= 0.0):
            raise ValueError(f"V and gamma must be non-negative, got V={self.V}, "
                             f"gamma={self.gamma}")

    @property
    def omega_squared(self) -> float:
        return self.V ** 2 - self.gamma ** 2 / 4.0

    @property
    def omega(self) -> complex:
        """Rabi frequency; imaginary when overdamped."""
        return complex(np.sqrt(complex(self.omega_squared)))


@dataclass(frozen=True)
class BlochState:
    """Coefficients of ``u s1 + v s2 + w s3 + x 1``; fields may be arrays."""

    u: float
    v: float
    w: float
    x: float

    def is_nonnegative(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.x + tol >= np.sqrt(self.u ** 2 + self.v ** 2 + self.w ** 2)))


class DetectionEvent(str, enum.Enum):
    EXCITED = "excited"
    GROUND = "ground"
    PLUS_SUPERPOSITION = "plus_superposition"
    SIGMA2_SUPERPOSITION = "sigma2_superposition"


# measurement operator at tau = 0 for each event, scaled to be the projector itself
DETECTION_BLOCH = {
    DetectionEvent.EXCITED: BlochState(0.0, 0.0, 0.5, 0.5),
    DetectionEvent.GROUND: BlochState(0.0, 0.0, -0.5, 0.5),
    DetectionEvent.PLUS_SUPERPOSITION: BlochState(0.5, 0.0, 0.0, 0.5),
    DetectionEvent.SIGMA2_SUPERPOSITION: BlochState(0.0, 0.5, 0.0, 0.5),
}


def tla_model(params: TwoLevelParams) -> LindbladModel:
    return LindbladModel(hamiltonian=0.5 * params.V * SIGMA_1,
                         jumps=(math.sqrt(params.gamma) * SIGMA_MINUS,))


def bloch_decompose(m, hermiticity_tol: float = opalg.HERMITICITY_TOL) -> BlochState:
    m = opalg.as_operator(m)
    if m.shape != (2, 2):
        raise OperatorError(f"Bloch decomposition needs a 2x2 operator, got {m.shape}")
    if opalg.max_asymmetry(m) > hermiticity_tol:
        raise OperatorError("Bloch decomposition needs a Hermitian operator")
    return BlochState(u=0.5 * opalg.hs_inner(m, SIGMA_1).real,
                      v=0.5 * opalg.hs_inner(m, SIGMA_2).real,
                      w=0.5 * opalg.hs_inner(m, SIGMA_3).real,
                      x=0.5 * opalg.trace(m).real)


def bloch_compose(b: BlochState) -> np.ndarray:
    """Operator (or ``(N, 2, 2)`` stack when fields are arrays) from coefficients."""
    u, v, w, x = (np.asarray(c, dtype=float)[..., None, None] for c in (b.u, b.v, b.w, b.x))
    out = u * SIGMA_1 + v * SIGMA_2 + w * SIGMA_3 + x * np.eye(2)
    return out


def damped_kernels(params: TwoLevelParams, tau):
    """``exp(-3 gamma tau/2) * (C, S)`` with ``C = cos(W tau)``, ``S = sin(W tau)/W``.

    Real arithmetic throughout: trigonometric for V > gamma/2, hyperbolic for
    V < gamma/2, and a short Taylor series in ``(W tau)^2`` near ``W = 0``.
    """
    tau = np.asarray(tau, dtype=float)
    g = params.gamma
    w2 = params.omega_squared
    wabs = math.sqrt(abs(w2))
    z = w2 * tau ** 2
    c_taylor = 1.0 - z / 2.0 + z ** 2 / 24.0 - z ** 3 / 720.0
    s_taylor = tau * (1.0 - z / 6.0 + z ** 2 / 120.0 - z ** 3 / 5040.0)
    decay = np.exp(-1.5 * g * tau)
    if wabs == 0.0:
        return decay * c_taylor, decay * s_taylor
    if w2 > 0.0:
        c = decay * np.cos(wabs * tau)
        s = decay * np.sin(wabs * tau) / wabs
    else:
        # combine exponents so cosh/sinh never overflow before the decay is applied
        up = np.exp((wabs - 1.5 * g) * tau)
        down = np.exp((-wabs - 1.5 * g) * tau)
        c = 0.5 * (up + down)
        s = 0.5 * (up - down) / wabs
    small = wabs * tau < TAYLOR_SWITCH
    return np.where(small, decay * c_taylor, c), np.where(small, decay * s_taylor, s)


def _scalar_or_array(a):
    return float(a) if np.ndim(a) == 0 else a


def analytic_bloch(b0: BlochState, tau, params: TwoLevelParams) -> BlochState:
    """Closed-form backward evolution of the Bloch coefficients to ``tau``."""
    g, big_v = params.gamma, params.V
    den = 2.0 * g ** 2 + big_v ** 2
    if den == 0.0:
        raise ValueError("analytic solution undefined for V = gamma = 0")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise ValueError("premeasurement time must be non-negative")
    ec, es = damped_kernels(params, tau)
    u0, v0, w0, x0 = b0.u, b0.v, b0.w, b0.x
    u = u0 * np.exp(-g * tau)
    v = v0 * (ec + 0.5 * g * es) + w0 * big_v * es
    w = -v0 * big_v * es + w0 * (ec - 0.5 * g * es)
    drive = big_v * v0 - g * w0
    x = (x0 + 2.0 * g * drive / den
         - (2.0 * g / den) * (0.5 * ((g ** 2 + 2.0 * big_v ** 2) * w0 + 3.0 * g * big_v * v0) * es
                              + drive * ec))
    return BlochState(*(_scalar_or_array(c) for c in (u, v, w, x)))


def detection(event, tau, params: TwoLevelParams) -> np.ndarray:
    """Retrodictive density operator ``B(tau) / (2 x(tau))`` for a detection event."""
    b = analytic_bloch(DETECTION_BLOCH[DetectionEvent(event)], tau, params)
    if np.any(np.asarray(b.x) <= 0.0):
        raise ArithmeticError("non-positive trace in analytic detection operator")
    return bloch_compose(b) / (2.0 * np.asarray(b.x, dtype=float)[..., None, None])


def detection_operator(event) -> np.ndarray:
    """Measurement operator at the detection time (the detected projector)."""
    return bloch_compose(DETECTION_BLOCH[DetectionEvent(event)])


def excited_matrix_elements(tau, params: TwoLevelParams, w0: float = 0.5):
    """``(<e|rho|g>, <e|rho|e>)`` after excited-state detection, independent closed-form route.

    Evaluated directly with the complex Rabi frequency, independently of
    :func:`analytic_bloch`. Undefined at exactly ``V = gamma/2``.
    """
    tau = np.asarray(tau, dtype=float)
    g, big_v = params.gamma, params.V
    om = params.omega
    if om == 0:
        raise ZeroDivisionError("closed-form elements are singular at V = gamma/2")
    decay = np.exp(-1.5 * g * tau)
    sin = np.sin(om * tau)
    cos = np.cos(om * tau)
    den = big_v ** 2 + 2.0 * g ** 2
    x = (w0 / den) * (big_v ** 2 - 2.0 * g * decay
                      * ((g ** 2 + 2.0 * big_v ** 2) / (2.0 * om) * sin - g * cos))
    eg = -1j * big_v * w0 / (2.0 * x * om) * decay * sin
    ee = w0 / (2.0 * x * den) * (big_v ** 2 + decay * ((big_v ** 2 + 4.0 * g ** 2) * cos
                                                       - g / (2.0 * om) * (5.0 * big_v ** 2 + 4.0 * g ** 2) * sin))
    # drop roundoff left over from the complex frequency
    eg = 1j * np.imag(eg)
    ee = np.real(ee)
    if np.ndim(tau) == 0:
        return complex(eg), float(ee)
    return eg, ee


def preparation_probabilities(rho_retr, prep: DeviceSet) -> list[tuple[str, float]]:
    """``[(i, P(i|j))]`` from a retrodictive density at the preparation time."""
    rho = opalg.as_operator(rho_retr, "retrodictive density")
    tr = opalg.trace(rho)
    if abs(tr - 1.0) > 1e-9:
        raise OperatorError(f"retrodictive density must have unit trace, got {tr:.12g}")
    return [(label, retrodict_from_operator(prep, label, rho)) for label in prep.labels]
