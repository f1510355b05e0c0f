"""File formats: trajectory CSV, JSON documents, sweep CSV."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .estimate import SWEEP_COLUMNS, SweepRow
from .protocol import TrajectorySet


def fmt(x: float) -> str:
    """17 significant digits: exact float round-trip."""
    return format(float(x), ".17g")


def complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def pair_complex(pair) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ValueError(f"complex numbers are [re, im] pairs, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def complex_matrix(rows) -> np.ndarray:
    return np.array([[pair_complex(v) for v in row] for row in rows], dtype=np.complex128)


def matrix_rows(m: np.ndarray) -> list[list[list[float]]]:
    return [[complex_pair(v) for v in row] for row in np.asarray(m)]


def dumps(obj) -> str:
    # Python's float repr is the shortest string that round-trips exactly.
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def trajectories_csv(records: TrajectorySet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["traj_id"] + [f"m_{n + 1}" for n in range(records.n_steps)])
    for k, row in enumerate(records.outcomes):
        writer.writerow([k] + [int(v) for v in row])
    return buf.getvalue()


def read_trajectories(source: str | Path | TextIO, shape: Sequence[int] | None = None) -> TrajectorySet:
    """Parse a trajectory CSV; ``shape`` defaults to ``max + 1`` per column."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_trajectories(fh, shape)
    reader = csv.reader(source)
    header = [h.strip() for h in next(reader)]
    n_steps = len(header) - 1
    if header[0] != "traj_id" or header[1:] != [f"m_{n + 1}" for n in range(n_steps)]:
        raise ValueError(f"unexpected trajectory header {header}")
    rows = [[int(v) for v in r[1:]] for r in reader if r]
    outcomes = np.array(rows, dtype=np.int64).reshape(-1, n_steps)
    if shape is None:
        shape = tuple(int(c) + 1 for c in outcomes.max(axis=0)) if len(rows) else (1,) * n_steps
    return TrajectorySet(outcomes, tuple(shape))


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    lines += [",".join(fmt(v) for v in row.csv_fields()) for row in rows]
    return "\n".join(lines) + "\n"
