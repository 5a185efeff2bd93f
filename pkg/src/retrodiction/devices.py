"""Preparation and measurement devices as normalized sets of operators.

A preparation device is described by operators ``Lambda_i`` (one per
preparation event ``i``) and a measurement device by ``Gamma_j``. Each set is
scaled so the total has unit trace, which makes ``Tr(Lambda_i)`` the a priori
probability of event ``i``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import opalg
from .errors import DeviceError


class DeviceKind(str, enum.Enum):
    PREPARATION = "preparation"
    MEASUREMENT = "measurement"


@dataclass(frozen=True, eq=False)
class DeviceSet:
    kind: DeviceKind
    labels: tuple[str, ...]
    ops: tuple[np.ndarray, ...]
    total: np.ndarray

    @property
    def dim(self) -> int:
        return self.total.shape[0]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DeviceError(f"unknown {self.kind.value} label {label!r}; "
                              f"known labels: {list(self.labels)}") from None

    def op(self, label: str) -> np.ndarray:
        return self.ops[self.index(label)]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class PomSet:
    """Probability operator measure of an unbiased device: elements sum to 1."""

    labels: tuple[str, ...]
    elements: tuple[np.ndarray, ...]
    scale: float


def build_device_set(
    kind,
    labels: Sequence[str],
    raw_ops: Sequence,
    positivity_tol: float = opalg.POSITIVITY_TOL,
    hermiticity_tol: float = opalg.HERMITICITY_TOL,
) -> DeviceSet:
    """Validate operators and scale them so the total has unit trace."""
    kind = DeviceKind(kind)
    labels = tuple(str(lab) for lab in labels)
    if not raw_ops:
        raise DeviceError(f"{kind.value} device needs at least one operator")
    if len(labels) != len(raw_ops):
        raise DeviceError(f"{len(labels)} labels for {len(raw_ops)} operators")
    if len(set(labels)) != len(labels):
        raise DeviceError(f"duplicate labels in {list(labels)}")

    ops = []
    for label, raw in zip(labels, raw_ops):
        op = opalg.as_operator(raw, name=f"{kind.value} operator {label!r}")
        if ops and op.shape != ops[0].shape:
            raise DeviceError(f"operator {label!r} has shape {op.shape}, expected {ops[0].shape}")
        check = opalg.min_eig_hermitian(op, hermiticity_tol)
        if not check.hermitian:
            raise DeviceError(f"operator {label!r} is not Hermitian "
                              f"(asymmetry {check.max_asymmetry:.3e})")
        if check.min_eigenvalue < -positivity_tol:
            raise DeviceError(f"operator {label!r} has negative eigenvalue "
                              f"{check.min_eigenvalue:.3e}")
        if np.max(np.abs(op)) == 0.0:
            warnings.warn(f"{kind.value} operator {label!r} is zero: event has zero "
                          "a priori probability", stacklevel=2)
        ops.append(opalg.hermitian_part(op))

    norm = sum(opalg.trace(op) for op in ops).real
    if not norm > 0.0:
        raise DeviceError(f"{kind.value} operators sum to an operator with zero trace")
    ops = tuple(op / norm for op in ops)
    total = np.sum(ops, axis=0)
    return DeviceSet(kind=kind, labels=labels, ops=ops, total=total)


def device_from_states(kind, labels: Sequence[str], states: Sequence, priors: Sequence[float],
                       prior_tol: float = 1e-9) -> DeviceSet:
    """Build ``Lambda_i = prior_i |psi_i><psi_i|`` from state vectors."""
    priors = [float(p) for p in priors]
    if len(priors) != len(states):
        raise DeviceError(f"{len(priors)} priors for {len(states)} states")
    if any(p < 0.0 for p in priors):
        raise DeviceError("priors must be non-negative")
    if abs(sum(priors) - 1.0) > prior_tol:
        raise DeviceError(f"priors must sum to 1 (got {sum(priors)!r})")
    return build_device_set(kind, labels,
                            [p * opalg.projector(s) for p, s in zip(priors, states)])


def a_priori_probability(dev: DeviceSet, label: str) -> float:
    op = dev.op(label)
    return opalg.real_scalar(opalg.trace(op), tol=1e-13, what=f"Tr of {label!r}")


def unbiased_scale(dev: DeviceSet, tol: float = 1e-10) -> float | None:
    """Return ``G`` when the total is ``G * 1`` within ``tol``, else None."""
    g = opalg.identity_proportionality(dev.total, tol)
    if g is None:
        return None
    return g.real


def is_unbiased(dev: DeviceSet, tol: float = 1e-10) -> bool:
    return unbiased_scale(dev, tol) is not None


def pom_elements(dev: DeviceSet, tol: float = 1e-10) -> PomSet:
    g = unbiased_scale(dev, tol)
    if g is None:
        raise DeviceError("POM undefined for biased operation")
    return PomSet(labels=dev.labels, elements=tuple(op / g for op in dev.ops), scale=g)


def _unit_trace(op: np.ndarray, label: str) -> np.ndarray:
    tr = opalg.trace(op).real
    if not tr > 0.0:
        raise DeviceError(f"operator {label!r} has zero trace; its density operator is undefined")
    return op / tr


def predictive_density(dev: DeviceSet, label: str) -> np.ndarray:
    """``Lambda_i / Tr(Lambda_i)``."""
    return _unit_trace(dev.op(label), label)


def retrodictive_density(dev: DeviceSet, label: str) -> np.ndarray:
    """``Gamma_j / Tr(Gamma_j)``."""
    return _unit_trace(dev.op(label), label)


def no_information(dim: int, label: str = "none", kind=DeviceKind.MEASUREMENT) -> DeviceSet:
    """Single-event device whose operator is proportional to the identity."""
    return build_device_set(kind, [label], [opalg.identity(dim)])
