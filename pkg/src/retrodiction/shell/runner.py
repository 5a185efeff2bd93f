"""Scenario execution, parameter sweeps and run reports."""

from __future__ import annotations

import contextlib
import copy
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import opalg
from ..devices import a_priori_probability, predictive_density
from ..errors import RetrodictionError, ScenarioError
from ..lindblad import (Direction, Equation, EvolutionWindow, Trajectory, collapse_invariant,
                        evolve, relative_spread, TARGET_STEP_RATE)
from ..probcalc import joint_table
from ..tla import analytic_bloch, bloch_compose, bloch_decompose
from . import io
from .scenario import Scenario, scenario_from_dict

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-9
POSITIVITY_FLOOR = -1e-9
NORMALIZATION_TOL = 1e-10
ANALYTIC_RUN_TOL = 1e-6
COLLAPSE_TOL = 1e-7


class RunError(RetrodictionError):
    """Engine failure inside a scenario run, tagged with scenario and stage."""

    def __init__(self, scenario: str, stage: str, cause: Exception):
        super().__init__(f"[{scenario}] {stage}: {cause}")
        self.scenario = scenario
        self.stage = stage


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name}: worst={self.worst:.3e} tol={self.tol:.1e}{extra}"


@dataclass
class RunReport:
    scenario: str
    trajectories: list[str] = field(default_factory=list)
    tables: list[str] = field(default_factory=list)
    scripts: list[str] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"scenario {self.scenario}: {len(self.trajectories)} trajectories, "
                 f"{len(self.tables)} tables, {self.wall_time:.2f} s"]
        lines += ["  " + c.line() for c in self.checks]
        lines.append("  " + ("all checks passed" if self.passed else "CHECKS FAILED"))
        return "\n".join(lines)


@contextlib.contextmanager
def _stage(scenario: str, stage: str):
    try:
        yield
    except RetrodictionError as exc:
        if isinstance(exc, RunError):
            raise
        raise RunError(scenario, stage, exc) from exc
    except (ValueError, ArithmeticError) as exc:
        raise RunError(scenario, stage, exc) from exc


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "_.-" else f"x{ord(c):02x}" for c in label)


def _check(name: str, worst: float, tol: float, upper: bool = True, detail: str = "") -> CheckResult:
    passed = worst <= tol if upper else worst >= tol
    return CheckResult(name, bool(passed), float(worst), float(tol), detail)


def _series_probabilities(prep, states: np.ndarray) -> dict[str, np.ndarray]:
    """``P(i | X_k)`` for each snapshot ``X_k`` of a measurement-side trajectory."""
    num = {label: np.einsum("ab,kba->k", op, states).real
           for label, op in zip(prep.labels, prep.ops)}
    den = np.einsum("ab,kba->k", prep.total, states).real
    return {f"P({label})": v / den for label, v in num.items()}


class _Writer:
    def __init__(self, out: Path, scenario: Scenario, report: RunReport):
        self.out = out
        self.scenario = scenario
        self.report = report
        self.plots: list[tuple[str, list[str], list[str]]] = []

    def trajectory(self, kind: str, label: str, traj: Trajectory) -> None:
        fname = f"{self.scenario.name}_{kind}_{_slug(label)}.csv"
        header, rows = io.trajectory_rows(traj, bloch=self.scenario.two_level is not None)
        io.write_csv(self.out / fname, header, rows)
        dim = traj.states.shape[1]
        self.plots.append((fname, header, [f"re_{a}{'_' if dim > 10 else ''}{a}"
                                           for a in range(dim)]))
        self.report.trajectories.append(fname)

    def series(self, kind: str, label: str, time_label: str, times, columns) -> None:
        fname = f"{self.scenario.name}_{kind}_{_slug(label)}.csv"
        io.write_series(self.out / fname, time_label, times, columns)
        self.plots.append((fname, [time_label, *columns], list(columns)))
        self.report.tables.append(fname)

    def joint(self, table) -> None:
        fname = f"{self.scenario.name}_joint.csv"
        (self.out / fname).write_text(table.to_csv())
        self.report.tables.append(fname)

    def finish(self) -> None:
        if "gnuplot" in self.scenario.formats and self.plots:
            fname = f"{self.scenario.name}.gp"
            (self.out / fname).write_text(io.gnuplot_script(self.scenario.name, self.plots))
            self.report.scripts.append(fname)


def _collapse_check(sc: Scenario, window: EvolutionWindow) -> CheckResult:
    worst = 0.0
    for label, lam in zip(sc.prep.labels, sc.prep.ops):
        if a_priori_probability(sc.prep, label) <= 0.0:
            continue
        rho = predictive_density(sc.prep, label)
        for gamma in sc.meas.ops:
            vals = collapse_invariant(sc.model, rho, gamma, window)
            if abs(np.mean(vals)) > 1e-12:
                worst = max(worst, relative_spread(vals))
    return _check("collapse_invariance", worst, COLLAPSE_TOL)


def _run_backward(sc: Scenario, steps: int, w: _Writer, checks: dict) -> None:
    window = EvolutionWindow(0.0, sc.span, steps, Direction.RETRODICTIVE_BACKWARD)
    raws, retrs = {}, {}
    for label, gamma in zip(sc.meas.labels, sc.meas.ops):
        with _stage(sc.name, f"backward evolution of {label!r}"):
            raws[label] = evolve(sc.model, gamma, window, Equation.BACKWARD_MDO)
            if opalg.trace(gamma).real <= 0.0:
                logger.warning("measurement operator %r is zero; skipping its retrodiction", label)
                continue
            if sc.equation is Equation.RETRODICTIVE_NONLINEAR:
                retrs[label] = evolve(sc.model, gamma / opalg.trace(gamma).real, window,
                                      Equation.RETRODICTIVE_NONLINEAR, direct=sc.direct)
            else:
                retrs[label] = raws[label].normalize()
        if sc.equation is Equation.BACKWARD_MDO:
            w.trajectory("mdo", label, raws[label])
        if label in retrs:
            w.trajectory("retr", label, retrs[label])

    trace_dev = max(float(np.max(np.abs(np.trace(t.states, axis1=1, axis2=2) - 1.0)))
                    for t in retrs.values())
    floor = min(float(np.min(t.min_eigenvalues)) for t in retrs.values())
    checks["trace_unit"] = _check("trace_unit", trace_dev, TRACE_TOL)
    checks["positivity"] = _check("positivity", floor, POSITIVITY_FLOOR, upper=False)

    if sc.prep is not None:
        norm_dev = 0.0
        for label, traj in retrs.items():
            with _stage(sc.name, f"preparation probabilities for {label!r}"):
                probs = _series_probabilities(sc.prep, traj.states)
            w.series("prep_given", label, "tau", traj.times, probs)
            norm_dev = max(norm_dev, float(np.max(np.abs(sum(probs.values()) - 1.0))))
        checks["probability_normalization"] = _check("probability_normalization", norm_dev,
                                                     NORMALIZATION_TOL)
        with _stage(sc.name, "joint table"):
            w.joint(joint_table(sc.prep, sc.meas,
                                evolved_meas=[raws[lab].states[-1] for lab in sc.meas.labels]))
        with _stage(sc.name, "collapse invariance"):
            checks["collapse_invariance"] = _collapse_check(
                sc, EvolutionWindow(0.0, sc.span, steps))

    if sc.two_level is not None and (sc.two_level.V > 0.0 or sc.two_level.gamma > 0.0):
        worst = 0.0
        for label, traj in retrs.items():
            b = analytic_bloch(bloch_decompose(sc.meas.op(label)), traj.times, sc.two_level)
            exact = bloch_compose(b) / (2.0 * np.asarray(b.x)[:, None, None])
            worst = max(worst, float(np.max(np.abs(exact - traj.states))))
        checks["analytic_agreement"] = _check("analytic_agreement", worst, ANALYTIC_RUN_TOL)


def _run_predictive(sc: Scenario, steps: int, w: _Writer, checks: dict) -> None:
    window = EvolutionWindow(0.0, sc.span, steps, Direction.PREDICTIVE_FORWARD)
    trajs = {}
    for label in sc.prep.labels:
        if a_priori_probability(sc.prep, label) <= 0.0:
            logger.warning("preparation event %r has zero probability; skipped", label)
            continue
        with _stage(sc.name, f"forward evolution of {label!r}"):
            trajs[label] = evolve(sc.model, predictive_density(sc.prep, label), window,
                                  Equation.PREDICTIVE)
        w.trajectory("pred", label, trajs[label])

    trace_dev = max(float(np.max(np.abs(np.trace(t.states, axis1=1, axis2=2) - 1.0)))
                    for t in trajs.values())
    floor = min(float(np.min(t.min_eigenvalues)) for t in trajs.values())
    checks["trace_unit"] = _check("trace_unit", trace_dev, TRACE_TOL)
    checks["positivity"] = _check("positivity", floor, POSITIVITY_FLOOR, upper=False)

    if sc.meas is not None:
        norm_dev = 0.0
        for label, traj in trajs.items():
            num = {f"P({j})": np.einsum("ab,kba->k", g, traj.states).real
                   for j, g in zip(sc.meas.labels, sc.meas.ops)}
            den = np.einsum("ab,kba->k", sc.meas.total, traj.states).real
            probs = {k: v / den for k, v in num.items()}
            w.series("meas_given", label, "time", traj.times, probs)
            norm_dev = max(norm_dev, float(np.max(np.abs(sum(probs.values()) - 1.0))))
        checks["probability_normalization"] = _check("probability_normalization", norm_dev,
                                                     NORMALIZATION_TOL)
        # zero-probability events contribute nothing to the joint table
        evolved = [trajs[lab].states[-1] if lab in trajs else np.zeros_like(sc.prep.total)
                   for lab in sc.prep.labels]
        with _stage(sc.name, "joint table"):
            w.joint(joint_table(sc.prep, sc.meas, evolved_pred=evolved))
        with _stage(sc.name, "collapse invariance"):
            checks["collapse_invariance"] = _collapse_check(sc, window)


def run(sc: Scenario, out_dir=None, steps_override: int | None = None) -> RunReport:
    """Execute a scenario, write its CSVs (and plot script) and return a report."""
    start = time.perf_counter()
    out = Path(out_dir or sc.output_dir or f"out_{sc.name}")
    out.mkdir(parents=True, exist_ok=True)
    steps = int(steps_override or sc.steps)
    if steps < 1:
        raise ScenarioError("steps must be positive")
    h = sc.span / steps
    if h * sc.model.max_rate > TARGET_STEP_RATE:
        logger.warning("%s: step %.3g gives h*rate = %.3g > %.0e; accuracy may suffer",
                       sc.name, h, h * sc.model.max_rate, TARGET_STEP_RATE)

    report = RunReport(scenario=sc.name)
    writer = _Writer(out, sc, report)
    checks: dict[str, CheckResult] = {}
    if sc.equation is Equation.PREDICTIVE:
        _run_predictive(sc, steps, writer, checks)
    else:
        _run_backward(sc, steps, writer, checks)
    writer.finish()
    report.checks = list(checks.values())
    report.wall_time = time.perf_counter() - start
    return report


_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)|\[(\d+)\]")


def parse_path(expr: str) -> list:
    parts, pos = [], 0
    for m in _TOKEN.finditer(expr):
        gap = expr[pos:m.start()]
        if gap not in ("", ".") or (gap == "." and not parts):
            raise ScenarioError(f"invalid parameter path {expr!r}")
        parts.append(m.group(1) if m.group(1) is not None else int(m.group(2)))
        pos = m.end()
    if not parts or pos != len(expr):
        raise ScenarioError(f"invalid parameter path {expr!r}")
    return parts


def _get(doc, parts):
    node = doc
    for p in parts:
        if isinstance(p, int):
            if not isinstance(node, list) or p >= len(node):
                raise KeyError(p)
        elif not isinstance(node, dict) or p not in node:
            raise KeyError(p)
        node = node[p]
    return node


def _all_paths(node, prefix=()):
    yield prefix
    if isinstance(node, dict):
        for k, v in node.items():
            yield from _all_paths(v, prefix + (k,))
    elif isinstance(node, list):
        for k, v in enumerate(node):
            yield from _all_paths(v, prefix + (k,))


def resolve_path(doc: dict, expr: str) -> list:
    """Full path of the scalar addressed by ``expr``.

    ``expr`` is either a path from the document root (``model.two_level.V``)
    or a unique suffix of one (``two_level.V``, ``priors[0]``).
    """
    parts = parse_path(expr)
    try:
        target = _get(doc, parts)
        full = parts
    except KeyError:
        n = len(parts)
        matches = [list(p) for p in _all_paths(doc) if len(p) >= n and list(p[-n:]) == parts]
        if not matches:
            raise ScenarioError(f"parameter path {expr!r} does not exist in the scenario") from None
        if len(matches) > 1:
            raise ScenarioError(f"parameter path {expr!r} is ambiguous: "
                                f"{[_fmt_path(m) for m in matches]}") from None
        full = matches[0]
        target = _get(doc, full)
    if isinstance(target, bool) or not isinstance(target, (int, float)):
        raise ScenarioError(f"parameter path {expr!r} does not address a numeric scalar")
    return full


def _fmt_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else p)
    return out


def _dir_label(parts) -> str:
    # filesystem-friendly: priors[0] -> priors_0
    out = ""
    for p in parts:
        out += f"_{p}" if isinstance(p, int) else (f".{p}" if out else p)
    return _slug(out)


def _with_value(doc: dict, full: list, value: float) -> dict:
    new = copy.deepcopy(doc)
    parent = _get(new, full[:-1])
    key = full[-1]
    if isinstance(parent[key], int) and not isinstance(value, float):
        value = int(value)
    parent[key] = value
    if len(full) >= 2 and full[-2] == "priors":
        # keep the prior set normalized: rescale the other entries to 1 - value
        rest = [k for k in range(len(parent)) if k != key]
        rest_sum = sum(parent[k] for k in rest)
        if rest and rest_sum > 0:
            for k in rest:
                parent[k] = parent[k] * (1.0 - value) / rest_sum
        elif rest:
            for k in rest:
                parent[k] = (1.0 - value) / len(rest)
    return new


def _sweep_entry(doc: dict, source: str, out_dir: str, steps_override: int | None) -> RunReport:
    return run(scenario_from_dict(doc, source), out_dir, steps_override)


def sweep(sc: Scenario, param: str, values: Sequence[float], out_dir=None,
          steps_override: int | None = None, workers: int = 1) -> RunReport:
    """Run ``sc`` once per value of ``param``; write an index CSV of the outputs."""
    start = time.perf_counter()
    full = resolve_path(sc.raw, param)
    out = Path(out_dir or sc.output_dir or f"out_{sc.name}")
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for value in values:
        doc = _with_value(sc.raw, full, value)
        source = f"{sc.name}[{param}={value!r}]"
        scenario_from_dict(doc, source)  # validate every entry before running any
        sub = f"{_dir_label(full)}={value!r}"
        entries.append((value, doc, source, sub))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_entry, doc, source, str(out / sub), steps_override)
                       for _, doc, source, sub in entries]
            reports = [f.result() for f in futures]
    else:
        reports = [_sweep_entry(doc, source, str(out / sub), steps_override)
                   for _, doc, source, sub in entries]

    total = RunReport(scenario=f"{sc.name} sweep {param}")
    rows = []
    for (value, _, _, sub), rep in zip(entries, reports):
        files = [f"{sub}/{f}" for f in rep.trajectories + rep.tables + rep.scripts]
        rows.append([repr(value), sub, "pass" if rep.passed else "fail", ";".join(files)])
        total.trajectories += [f"{sub}/{f}" for f in rep.trajectories]
        total.tables += [f"{sub}/{f}" for f in rep.tables]
        total.scripts += [f"{sub}/{f}" for f in rep.scripts]
        total.checks += [CheckResult(f"{param}={value!r}: {c.name}", c.passed, c.worst, c.tol,
                                     c.detail) for c in rep.checks]
    index = f"{sc.name}_sweep_index.csv"
    io.write_csv(out / index, ["value", "directory", "checks", "files"], rows)
    total.tables.insert(0, index)
    total.wall_time = time.perf_counter() - start
    return total
