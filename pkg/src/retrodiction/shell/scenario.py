"""Scenario files: strict JSON schema, parsing and validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .. import opalg
from ..devices import DeviceKind, DeviceSet, build_device_set, device_from_states
from ..errors import DeviceError, OperatorError, ScenarioError
from ..lindblad import Equation, LindbladModel
from ..tla import DetectionEvent, TwoLevelParams, detection_operator, tla_model

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_MATRIX = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _COMPLEX}}
_LABELS = {"type": "array", "minItems": 1, "items": {"type": "string", "minLength": 1}}

_DEVICE = {
    "oneOf": [
        {"type": "object", "additionalProperties": False,
         "required": ["labels", "operators"],
         "properties": {"labels": _LABELS, "operators": {"type": "array", "minItems": 1,
                                                          "items": _MATRIX}}},
        {"type": "object", "additionalProperties": False,
         "required": ["labels", "states", "priors"],
         "properties": {"labels": _LABELS,
                        "states": {"type": "array", "minItems": 1,
                                   "items": {"type": "array", "minItems": 1, "items": _COMPLEX}},
                        "priors": {"type": "array", "minItems": 1,
                                   "items": {"type": "number", "minimum": 0}}}},
    ]
}

SCENARIO_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "retrodiction scenario",
    "description": "Complex numbers are [re, im]; matrices are row-major nested arrays.",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "model", "evolution"],
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "model": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["two_level"],
                 "properties": {"two_level": {
                     "type": "object", "additionalProperties": False,
                     "required": ["V", "gamma"],
                     "properties": {"V": {"type": "number", "minimum": 0},
                                    "gamma": {"type": "number", "minimum": 0}}}}},
                {"type": "object", "additionalProperties": False,
                 "required": ["dimension", "hamiltonian"],
                 "properties": {"dimension": {"type": "integer", "minimum": 1},
                                "hamiltonian": _MATRIX,
                                "jump_operators": {"type": "array", "items": _MATRIX}}},
            ]
        },
        "preparation_device": _DEVICE,
        "measurement_device": _DEVICE,
        "detection": {"enum": [e.value for e in DetectionEvent]},
        "evolution": {
            "type": "object", "additionalProperties": False,
            "required": ["steps"],
            "properties": {
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "tau_end": {"type": "number", "exclusiveMinimum": 0},
                "steps": {"type": "integer", "minimum": 1},
                "equation": {"enum": [e.value for e in Equation]},
                "direct": {"type": "boolean"},
            },
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "uniqueItems": True,
                            "items": {"enum": ["csv", "gnuplot"]}},
            },
        },
    },
}


@dataclass(eq=False)
class Scenario:
    name: str
    model: LindbladModel
    equation: Equation
    span: float
    steps: int
    two_level: TwoLevelParams | None = None
    prep: DeviceSet | None = None
    meas: DeviceSet | None = None
    detection: DetectionEvent | None = None
    direct: bool = False
    output_dir: str | None = None
    formats: tuple[str, ...] = ("csv",)
    raw: dict = field(default_factory=dict, repr=False)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _matrix(raw, where: str) -> np.ndarray:
    rows = [[complex(re, im) for re, im in row] for row in raw]
    if any(len(r) != len(rows) for r in rows):
        raise ScenarioError(f"{where}: matrix must be square")
    return np.array(rows, dtype=complex)


def _device(raw: dict, kind: DeviceKind, dim: int, where: str) -> DeviceSet:
    labels = raw["labels"]
    try:
        if "operators" in raw:
            if len(raw["operators"]) != len(labels):
                raise ScenarioError(f"{where}: {len(labels)} labels for "
                                    f"{len(raw['operators'])} operators")
            ops = [_matrix(m, f"{where}.operators[{k}]") for k, m in enumerate(raw["operators"])]
            for k, op in enumerate(ops):
                if op.shape != (dim, dim):
                    raise ScenarioError(f"{where}.operators[{k}]: shape {op.shape}, model "
                                        f"dimension is {dim}")
            return build_device_set(kind, labels, ops)
        states = [np.array([complex(re, im) for re, im in s]) for s in raw["states"]]
        for k, s in enumerate(states):
            if s.shape != (dim,):
                raise ScenarioError(f"{where}.states[{k}]: length {s.size}, model "
                                    f"dimension is {dim}")
        if len(labels) != len(states):
            raise ScenarioError(f"{where}: {len(labels)} labels for {len(states)} states")
        return device_from_states(kind, labels, states, raw["priors"])
    except (DeviceError, OperatorError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def scenario_from_dict(doc: dict, source: str = "<scenario>") -> Scenario:
    """Validate a parsed scenario document."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        raise ScenarioError(f"{source}: {_path(err.absolute_path)}: {err.message}")

    model_doc = doc["model"]
    two_level = None
    try:
        if "two_level" in model_doc:
            two_level = TwoLevelParams(model_doc["two_level"]["V"], model_doc["two_level"]["gamma"])
            model = tla_model(two_level)
        else:
            dim = model_doc["dimension"]
            h = _matrix(model_doc["hamiltonian"], "model.hamiltonian")
            if h.shape != (dim, dim):
                raise ScenarioError(f"model.hamiltonian: shape {h.shape}, dimension is {dim}")
            if opalg.max_asymmetry(h) > opalg.HERMITICITY_TOL:
                raise ScenarioError("model.hamiltonian: hamiltonian is not Hermitian")
            jumps = []
            for q, m in enumerate(model_doc.get("jump_operators", [])):
                a = _matrix(m, f"model.jump_operators[{q}]")
                if a.shape != (dim, dim):
                    raise ScenarioError(f"model.jump_operators[{q}]: shape {a.shape}, "
                                        f"dimension is {dim}")
                jumps.append(a)
            model = LindbladModel(h, tuple(jumps))
    except (OperatorError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise ScenarioError(f"{source}: {exc}") from None
        raise ScenarioError(f"{source}: model: {exc}") from None

    try:
        prep = meas = None
        if "preparation_device" in doc:
            prep = _device(doc["preparation_device"], DeviceKind.PREPARATION, model.dim,
                           "preparation_device")
        if "measurement_device" in doc:
            meas = _device(doc["measurement_device"], DeviceKind.MEASUREMENT, model.dim,
                           "measurement_device")
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from None

    detection = None
    if "detection" in doc:
        if two_level is None:
            raise ScenarioError(f"{source}: detection: needs a two_level model")
        if meas is not None:
            raise ScenarioError(f"{source}: detection and measurement_device are exclusive")
        detection = DetectionEvent(doc["detection"])
        meas = build_device_set(DeviceKind.MEASUREMENT, [detection.value],
                                [detection_operator(detection)])

    evo = doc["evolution"]
    if ("t_end" in evo) == ("tau_end" in evo):
        raise ScenarioError(f"{source}: evolution: give exactly one of t_end, tau_end")
    default_eq = Equation.PREDICTIVE if "t_end" in evo else Equation.BACKWARD_MDO
    equation = Equation(evo.get("equation", default_eq.value))
    if equation is Equation.PREDICTIVE:
        if "t_end" not in evo:
            raise ScenarioError(f"{source}: evolution: predictive runs take t_end")
        if prep is None:
            raise ScenarioError(f"{source}: predictive runs need a preparation_device")
    else:
        if "tau_end" not in evo:
            raise ScenarioError(f"{source}: evolution: {equation.value} runs take tau_end")
        if meas is None:
            raise ScenarioError(f"{source}: retrodictive runs need a measurement_device "
                                "or a detection event")
    if evo.get("direct") and equation is not Equation.RETRODICTIVE_NONLINEAR:
        raise ScenarioError(f"{source}: evolution.direct applies only to retrodictive_nonlinear")

    outputs = doc.get("outputs", {})
    return Scenario(
        name=doc["name"], model=model, equation=equation,
        span=float(evo.get("t_end", evo.get("tau_end"))), steps=int(evo["steps"]),
        two_level=two_level, prep=prep, meas=meas, detection=detection,
        direct=bool(evo.get("direct", False)), output_dir=outputs.get("directory"),
        formats=tuple(outputs.get("formats", ["csv"])), raw=copy.deepcopy(doc),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc, str(path))


def schema_text() -> str:
    return json.dumps(SCENARIO_SCHEMA, indent=2)
