"""Shared pieces of the protocol runners: observables and the report type."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..lindblad import Trajectory
from ..qcore import DensityMatrix, HilbertSpace, Operator, StateVector, annihilation, embed
from ..wbasis import LABELS, WLabel, w_state

QSS_FRACTION = 0.2


def lifted_w(label: WLabel, space: HilbertSpace) -> np.ndarray:
    """W-state amplitudes padded onto ion factors with extra levels (no motion)."""
    dims = tuple(space.dims[j] for j in space.ion_indices)
    amp = w_state(label).amplitudes.reshape(2, 2, 2)
    out = np.zeros(dims, dtype=complex)
    out[:2, :2, :2] = amp
    return out.reshape(-1)


def w_projector(label: WLabel, space: HilbertSpace) -> Operator:
    """|W><W| on the ions, identity on the mode."""
    v = lifted_w(label, space)
    p = np.outer(v, v.conj())
    m = space.motional_index
    if m is not None:
        p = np.kron(p, np.eye(space.dims[m]))
    return Operator(space, p)


def qubit_subspace_projector(space: HilbertSpace) -> Operator:
    out = np.eye(1)
    for j, f in enumerate(space.factors):
        if f.motional:
            out = np.kron(out, np.eye(f.dim))
        else:
            out = np.kron(out, np.diag([1.0, 1.0] + [0.0] * (f.dim - 2)))
    return Operator(space, out)


def mode_number(space: HilbertSpace) -> Operator:
    m = space.motional_index
    a = embed(annihilation(space.dims[m] - 1), m, space).data
    return Operator(space, a.conj().T @ a)


def standard_observables(space: HilbertSpace, target: WLabel) -> dict[str, Operator]:
    """fidelity, p_W.. for all eight labels, mean_n (if a mode exists) and p_leak."""
    obs: dict[str, Operator] = {"fidelity": w_projector(target, space)}
    for lab in LABELS:
        obs[f"p_{lab.tag}"] = w_projector(lab, space)
    if space.motional_index is not None:
        obs["mean_n"] = mode_number(space)
    obs["p_leak"] = Operator.identity(space) - qubit_subspace_projector(space)
    return obs


def initial_state(space: HilbertSpace, ions: StateVector | DensityMatrix | None = None) -> DensityMatrix:
    """Ion state (default |down down down>) times the motional ground state."""
    dims = tuple(space.dims[j] for j in space.ion_indices)
    if ions is None:
        ions = w_state(WLabel(0, 0))
    rho = ions.data if isinstance(ions, DensityMatrix) else np.outer(ions.amplitudes, ions.amplitudes.conj())
    small = ions.space.dims
    if len(small) != len(dims) or any(a > b for a, b in zip(small, dims)):
        raise ValueError(f"initial ion state dims {small} do not fit {dims}")
    full = np.zeros(dims + dims, dtype=complex)
    full[tuple(slice(0, d) for d in small) * 2] = rho.reshape(small + small)
    n = int(np.prod(dims))
    rho = full.reshape(n, n)
    m = space.motional_index
    if m is not None:
        ground = np.zeros((space.dims[m], space.dims[m]))
        ground[0, 0] = 1.0
        rho = np.kron(rho, ground)
    return DensityMatrix(space, rho)


@dataclass
class ProtocolReport:
    trajectory: Trajectory
    iteration_times: np.ndarray
    iteration_fidelities: np.ndarray
    target: WLabel
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def final_fidelity(self) -> float:
        return float(self.iteration_fidelities[-1])

    @property
    def peak(self) -> tuple[float, float]:
        """(fidelity, time in s) of the trajectory maximum."""
        f = self.trajectory["fidelity"]
        i = int(np.argmax(f))
        return float(f[i]), float(self.trajectory.times[i])

    @property
    def quasi_steady_state(self) -> float:
        """Mean fidelity over the final 20 % of the run time."""
        t = self.trajectory.times
        mask = t >= t[-1] * (1 - QSS_FRACTION)
        return float(np.mean(self.trajectory["fidelity"][mask]))
