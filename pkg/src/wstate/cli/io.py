"""CSV and JSON writers. Output is a pure function of the inputs: no timestamps, fixed
float formatting, sorted JSON keys."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..lindblad import Trajectory

TRAJECTORY_COLUMNS = (
    "time_us", "fidelity",
    "p_W00", "p_W10", "p_W1p", "p_W1m", "p_W20", "p_W2p", "p_W2m", "p_W30",
    "mean_n", "p_leak", "trace", "min_eig",
)


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def _header_lines(header: Mapping[str, Any] | None) -> list[str]:
    return [f"# {k}: {fmt(v)}" for k, v in (header or {}).items()]


def write_rows(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]],
               header: Mapping[str, Any] | None = None) -> Path:
    """Long-format CSV; ``header`` entries become leading '# key: value' lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in _header_lines(header):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def trajectory_rows(traj: Trajectory) -> Iterable[list[Any]]:
    n = len(traj.times)
    nan = np.full(n, np.nan)
    cols = [traj.times * 1e6] + [traj.observables.get(c, nan) for c in TRAJECTORY_COLUMNS[1:]]
    for i in range(n):
        yield [c[i] for c in cols]


def write_trajectory(path: Path, traj: Trajectory, header: Mapping[str, Any] | None = None) -> Path:
    return write_rows(path, TRAJECTORY_COLUMNS, trajectory_rows(traj), header)


def _plain(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else float(f"{x:.12g}")
    if isinstance(obj, complex):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    return obj if obj is None or isinstance(obj, str) else str(obj)


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
