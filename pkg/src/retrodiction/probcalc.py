"""Joint, conditional and Bayesian probabilities for device pairs.

Evolution between preparation and measurement enters only through
pre-evolved operators passed in by the caller:

* ``evolved_meas``: measurement operators evolved backwards to the
  preparation time, ``Gamma_j(t_p)``, aligned with ``meas.labels``.
* ``evolved_pred``: predictive density operators evolved forwards to the
  measurement time, ``rho_i(t_m)``, aligned with ``prep.labels``.

Without them the devices are taken to act at the same instant.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import opalg
from .devices import DeviceSet, a_priori_probability, predictive_density
from .errors import OperatorError, ProbabilityError

DENOMINATOR_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class OutcomeTable:
    prep_labels: tuple[str, ...]
    meas_labels: tuple[str, ...]
    joint: np.ndarray
    prep_marginal: np.ndarray
    meas_marginal: np.ndarray

    def to_csv(self) -> str:
        """Header of measurement labels, one row per preparation label."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["prep", *self.meas_labels])
        for label, row in zip(self.prep_labels, self.joint):
            writer.writerow([label, *(repr(float(p)) for p in row)])
        return buf.getvalue()


def _tr(a: np.ndarray, b: np.ndarray, what: str) -> float:
    scale = float(np.linalg.norm(a) * np.linalg.norm(b))
    try:
        return opalg.real_scalar(opalg.hs_inner(a, b), scale=scale, what=what)
    except OperatorError as exc:
        raise ProbabilityError(str(exc)) from None


def _meas_ops(meas: DeviceSet, evolved_meas) -> Sequence[np.ndarray]:
    if evolved_meas is None:
        return meas.ops
    if len(evolved_meas) != len(meas.labels):
        raise ProbabilityError(f"{len(evolved_meas)} evolved operators for "
                               f"{len(meas.labels)} measurement labels")
    return evolved_meas


def _check_dims(prep: DeviceSet, meas: DeviceSet) -> None:
    if prep.dim != meas.dim:
        raise ProbabilityError(f"device dimensions differ: {prep.dim} vs {meas.dim}")


def joint_table(prep: DeviceSet, meas: DeviceSet, evolved_meas=None,
                evolved_pred=None) -> OutcomeTable:
    """``P(i, j) = Tr(Lambda_i Gamma_j) / Tr(Lambda Gamma)`` with marginals.

    With ``evolved_pred`` the numerator is ``Tr(Lambda_i) Tr(rho_i(t_m) Gamma_j)``.
    """
    _check_dims(prep, meas)
    if evolved_pred is not None:
        if evolved_meas is not None:
            raise ProbabilityError("pass evolved_meas or evolved_pred, not both")
        if len(evolved_pred) != len(prep.labels):
            raise ProbabilityError(f"{len(evolved_pred)} evolved densities for "
                                   f"{len(prep.labels)} preparation labels")
        lams = [a_priori_probability(prep, i) * np.asarray(rho)
                for i, rho in zip(prep.labels, evolved_pred)]
    else:
        lams = prep.ops
    gammas = _meas_ops(meas, evolved_meas)
    raw = np.array([[_tr(lam, gam, f"Tr(Lambda_{i} Gamma_{j})")
                     for j, gam in zip(meas.labels, gammas)]
                    for i, lam in zip(prep.labels, lams)])
    norm = raw.sum()
    if norm <= DENOMINATOR_TOL:
        raise ProbabilityError("devices never coincide: Tr(Lambda Gamma) vanishes")
    joint = raw / norm
    return OutcomeTable(prep_labels=prep.labels, meas_labels=meas.labels, joint=joint,
                        prep_marginal=joint.sum(axis=1), meas_marginal=joint.sum(axis=0))


def predictive_conditional(prep: DeviceSet, i: str, meas: DeviceSet, j: str,
                           evolved_meas=None) -> float:
    """``P(j|i) = Tr(Lambda_i Gamma_j) / Tr(Lambda_i Gamma)``."""
    _check_dims(prep, meas)
    lam = prep.op(i)
    gammas = _meas_ops(meas, evolved_meas)
    num = _tr(lam, gammas[meas.index(j)], "P(j|i) numerator")
    den = sum(_tr(lam, g, "P(j|i) denominator") for g in gammas)
    if den <= DENOMINATOR_TOL:
        raise ProbabilityError(f"preparation event {i!r} can never be followed by a record")
    return num / den


def retrodict_from_operator(prep: DeviceSet, i: str, gamma: np.ndarray) -> float:
    """``Tr(Lambda_i X) / Tr(Lambda X)`` for a measurement-side operator ``X``.

    ``X`` may be a backward-evolved measurement operator or the corresponding
    retrodictive density operator; the normalization cancels.
    """
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.shape != prep.total.shape:
        raise ProbabilityError(f"operator shape {gamma.shape} does not match device "
                               f"dimension {prep.dim}")
    den = _tr(prep.total, gamma, "Tr(Lambda Gamma_j)")
    if den <= DENOMINATOR_TOL * max(1.0, float(np.linalg.norm(gamma))):
        raise ProbabilityError("measurement outcome impossible under this preparation device")
    return _tr(prep.op(i), gamma, "Tr(Lambda_i Gamma_j)") / den


def retrodictive_conditional(prep: DeviceSet, meas: DeviceSet, j: str, i: str,
                             evolved_meas=None, rho_retr=None) -> float:
    """``P(i|j) = Tr(Lambda_i Gamma_j) / Tr(Lambda Gamma_j)``.

    Pass ``rho_retr`` (the retrodictive density operator at the preparation
    time) instead of ``evolved_meas`` to use the equivalent density form.
    """
    _check_dims(prep, meas)
    if rho_retr is not None:
        meas.index(j)
        return retrodict_from_operator(prep, i, rho_retr)
    gammas = _meas_ops(meas, evolved_meas)
    return retrodict_from_operator(prep, i, gammas[meas.index(j)])


def bayes_retrodiction(prep: DeviceSet, meas: DeviceSet, j: str, i: str,
                       evolved_pred=None) -> float:
    """Retrodictive probability built only from predictive quantities.

    Uses ``P(i|j) = P(j|i) P(i) / sum_i' P(j|i') P(i')`` where ``P(j|i)`` comes
    from the forward-evolved predictive density ``rho_i(t_m)`` and ``P(i)`` is
    the probability that a recorded preparation event is ``i``. For an
    unbiased measurement device ``P(i)`` is the a priori ``Tr(Lambda_i)``; for
    a biased one it is weighted by ``Tr(rho_i(t_m) Gamma)``.
    """
    _check_dims(prep, meas)
    jdx = meas.index(j)
    prep.index(i)
    if evolved_pred is None:
        rhos = []
        for label in prep.labels:
            prior = a_priori_probability(prep, label)
            rhos.append(predictive_density(prep, label) if prior > 0.0 else None)
    else:
        if len(evolved_pred) != len(prep.labels):
            raise ProbabilityError(f"{len(evolved_pred)} evolved densities for "
                                   f"{len(prep.labels)} preparation labels")
        rhos = list(evolved_pred)

    weights = {}
    for label, rho in zip(prep.labels, rhos):
        prior = a_priori_probability(prep, label)
        if prior == 0.0 or rho is None:
            weights[label] = 0.0
            continue
        recorded = _tr(rho, meas.total, "Tr(rho_i Gamma)")
        if recorded <= DENOMINATOR_TOL:
            weights[label] = 0.0
            continue
        likelihood = _tr(rho, meas.ops[jdx], "Tr(rho_i Gamma_j)") / recorded
        weights[label] = likelihood * prior * recorded
    den = sum(weights.values())
    if den <= DENOMINATOR_TOL:
        raise ProbabilityError("measurement outcome impossible under this preparation device")
    return weights[i] / den
