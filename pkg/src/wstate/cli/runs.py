"""Execution helpers shared by presets and the simulate/sweep commands."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from ..protocols.common import ProtocolReport
from ..protocols.scheme_a import SchemeAConfig, run_scheme_a
from ..protocols.scheme_b import SchemeBConfig, run_scheme_b
from ..wbasis import WLabel, w_state

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    """Order-preserving map; worker processes when threads > 1 and there is more than one item."""
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as ex:
        return list(ex.map(fn, items))


def run_protocol(cfg: SchemeAConfig | SchemeBConfig, initial: WLabel | None = None) -> ProtocolReport:
    ions = None if initial is None else w_state(initial)
    if isinstance(cfg, SchemeAConfig):
        return run_scheme_a(cfg, ions)
    return run_scheme_b(cfg, ions)


def run_job(job: tuple[SchemeAConfig | SchemeBConfig, WLabel | None]) -> ProtocolReport:
    return run_protocol(*job)


def report_summary(report: ProtocolReport) -> dict[str, Any]:
    f_peak, t_peak = report.peak
    traj = report.trajectory
    return {
        "target": report.target.tag,
        "final_fidelity": report.final_fidelity,
        "peak_fidelity": f_peak,
        "peak_time_us": t_peak * 1e6,
        "quasi_steady_state_fidelity": report.quasi_steady_state,
        "duration_us": float(traj.times[-1]) * 1e6,
        "max_trace_error": float(np.max(np.abs(traj["trace"] - 1))),
        "min_eigenvalue": float(np.min(traj["min_eig"])),
        "step_fidelities": list(report.iteration_fidelities),
        "step_times_us": list(report.iteration_times * 1e6),
        "meta": dict(report.meta),
    }


def step_rows(report: ProtocolReport) -> Iterable[list[Any]]:
    for i, (t, f) in enumerate(zip(report.iteration_times, report.iteration_fidelities), start=1):
        yield [i, t * 1e6, f]
