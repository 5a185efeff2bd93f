"""CSV and plot-script writers.

Floats are written with ``repr`` (shortest round-trip form) so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..lindblad import Trajectory
from ..tla import bloch_decompose


def _fmt(x) -> str:
    return repr(float(x))


def element_columns(dim: int) -> list[str]:
    # indices run together for D <= 10; separated once two-digit indices appear
    sep = "_" if dim > 10 else ""
    cols = []
    for a in range(dim):
        for b in range(dim):
            cols += [f"re_{a}{sep}{b}", f"im_{a}{sep}{b}"]
    return cols


def trajectory_rows(traj: Trajectory, bloch: bool = False):
    dim = traj.states.shape[1]
    header = [traj.time_label, *element_columns(dim)]
    if bloch:
        header += ["u", "v", "w", "x"]
    rows = []
    for t, m in zip(traj.times, traj.states):
        flat = m.reshape(-1)
        row = [_fmt(t)]
        for z in flat:
            row += [_fmt(z.real), _fmt(z.imag)]
        if bloch:
            b = bloch_decompose(0.5 * (m + m.conj().T))
            row += [_fmt(b.u), _fmt(b.v), _fmt(b.w), _fmt(b.x)]
        rows.append(row)
    return header, rows


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_trajectory(path: Path, traj: Trajectory, bloch: bool = False) -> None:
    header, rows = trajectory_rows(traj, bloch)
    write_csv(path, header, rows)


def write_series(path: Path, time_label: str, times, columns: dict[str, np.ndarray]) -> None:
    """One row per grid point: time then one column per named series."""
    header = [time_label, *columns]
    data = [np.asarray(v, dtype=float) for v in columns.values()]
    rows = ([_fmt(t), *(_fmt(col[k]) for col in data)] for k, t in enumerate(times))
    write_csv(path, header, rows)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float data of a numeric CSV written by this module."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(x) for x in row] for row in reader])
    return header, data


def gnuplot_script(name: str, files: Sequence[tuple[str, Sequence[str], Sequence[str]]]) -> str:
    """Gnuplot script with one PNG per CSV.

    ``files`` holds ``(csv_name, header, columns_to_plot)``; column 1 is the
    time axis.
    """
    lines = [f"# plots for scenario {name}", "set terminal pngcairo size 900,600",
             "set datafile separator ','", "set grid", ""]
    for fname, header, wanted in files:
        stem = Path(fname).stem
        lines.append(f"set title '{stem}'")
        lines.append(f"set xlabel '{header[0]}'")
        lines.append(f"set output '{stem}.png'")
        parts = [f"'{fname}' using 1:{header.index(col) + 1} with lines title '{col}'"
                 for col in wanted]
        lines.append("plot " + ", \\\n     ".join(parts))
        lines.append("")
    return "\n".join(lines)
