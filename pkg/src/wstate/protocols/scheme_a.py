"""Spontaneous-emission scheme on three-level ions (down, up, r).

One cycle: achiral qubit MS, up-r MS, repump; chiral qubit MS, up-r MS, repump. The
up-r gate acts trivially on single-excitation states, so W1 states are never shelved;
the chiral qubit MS is picked to leave the target alone while driving its partner of
opposite chirality. Repumping uses L_q = sqrt(b_q Gamma) |q><r| on every ion and
runs until the r population is below a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..couplings import IonDrivePhase, MSConfig, ms_effective_hamiltonian, ms_propagator
from ..lindblad import (
    JumpOperator,
    Segment,
    SegmentSchedule,
    Trajectory,
    depletion_evolve,
    evolve,
    evolve_adjoint,
)
from ..qcore import DensityMatrix, HilbertSpace, Operator, StateVector, embed, transition
from ..wbasis import WLabel
from .common import ProtocolReport, initial_state, qubit_subspace_projector, standard_observables, w_projector
from .scheme_b import basis_states

US = 1e-6
DOWN, UP, R = 0, 1, 2


@dataclass(frozen=True)
class SchemeAConfig:
    target: WLabel = WLabel(1, 1)
    cycles: int = 50
    gamma_repump: float = 1e6
    branching: tuple[float, float, float] = (5 / 12, 1 / 3, 1 / 4)  # (b_up, b_down, b_r)
    gate_model: Literal["ideal", "full"] = "ideal"
    gate_time: float = math.sqrt(2) * 30 * US
    n_max: int = 10
    depletion_threshold: float = 1e-6
    cap_factor: float = 50.0
    dt: float = 100e-9
    record_stride: float | None = 1 * US

    def __post_init__(self) -> None:
        if not isinstance(self.target, WLabel):
            object.__setattr__(self, "target", WLabel(*self.target))
        if self.target.n_up != 1 or not self.target.chiral:
            raise ValueError("the repump scheme prepares W1+ or W1- only")
        if abs(sum(self.branching) - 1) > 1e-12 or min(self.branching) < 0:
            raise ValueError("branching ratios must be nonnegative and sum to 1")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if not self.gamma_repump > 0:
            raise ValueError("gamma_repump must be positive")
        if self.gate_model not in ("ideal", "full"):
            raise ValueError("gate_model must be 'ideal' or 'full'")
        if not 0 < self.depletion_threshold < 1:
            raise ValueError("depletion_threshold must lie in (0, 1)")

    @property
    def repumping_steps(self) -> int:
        return 2 * self.cycles

    @property
    def cap(self) -> float:
        return self.cap_factor / self.gamma_repump

    @property
    def fixed_repump_time(self) -> float:
        """Time for a fully shelved ion to fall below the threshold."""
        b_up, b_down, _ = self.branching
        return math.log(1 / self.depletion_threshold) / ((b_up + b_down) * self.gamma_repump)

    def space(self) -> HilbertSpace:
        return HilbertSpace.ions(3, 3, self.n_max if self.gate_model == "full" else None)


def gate_configs(cfg: SchemeAConfig) -> dict[str, MSConfig]:
    rabi = math.pi / cfg.gate_time  # delta = 2 Omega closes the loop after T = pi / Omega
    s = cfg.target.s
    return {
        "ms_achiral": MSConfig.ideal(rabi, IonDrivePhase.chiral(0), (DOWN, UP)),
        # chain W00 - W1(-s) - W2(s) - W30 excludes W1(s); gate label s => phases carry -s
        "ms_chiral": MSConfig.ideal(rabi, IonDrivePhase.chiral(-s), (DOWN, UP)),
        "ms_up_r": MSConfig.ideal(rabi, IonDrivePhase.chiral(0), (UP, R)),
    }


def repump_jumps(cfg: SchemeAConfig, space: HilbertSpace) -> list[JumpOperator]:
    b_up, b_down, b_r = cfg.branching
    out = []
    for j in space.ion_indices:
        for q, b in ((UP, b_up), (DOWN, b_down), (R, b_r)):
            if b > 0:
                out.append(JumpOperator.with_rate(b * cfg.gamma_repump, embed(transition(q, R, 3), j, space),
                                                  f"repump_{q}_{j}"))
    return out


class _Log:
    """Concatenates per-segment trajectories onto one clock."""

    def __init__(self):
        self.times: list[np.ndarray] = []
        self.obs: dict[str, list[np.ndarray]] = {}
        self.ends: list[int] = []
        self.t = 0.0
        self.count = 0

    def add(self, traj: Trajectory, skip_first: bool = True) -> None:
        sl = slice(1, None) if skip_first else slice(None)
        self.times.append(traj.times[sl] + self.t)
        for k, v in traj.observables.items():
            self.obs.setdefault(k, []).append(v[sl])
        self.count += len(traj.times[sl])
        self.t += traj.times[-1]
        self.ends.append(self.count - 1)

    def add_point(self, dt: float, values: dict[str, float]) -> None:
        self.t += dt
        self.times.append(np.array([self.t]))
        for k, v in values.items():
            self.obs.setdefault(k, []).append(np.array([v]))
        self.count += 1
        self.ends.append(self.count - 1)

    def trajectory(self, final: DensityMatrix) -> Trajectory:
        return Trajectory(np.concatenate(self.times), {k: np.concatenate(v) for k, v in self.obs.items()},
                          self.ends, final)


def _snapshot(rho: DensityMatrix, obs: dict[str, Operator]) -> dict[str, float]:
    vals = {k: float(np.real(np.sum(o.data.T * rho.data))) for k, o in obs.items()}
    h = 0.5 * (rho.data + rho.data.conj().T)
    vals["trace"] = float(np.trace(rho.data).real)
    vals["min_eig"] = float(np.linalg.eigvalsh(h)[0])
    return vals


def run_scheme_a(cfg: SchemeAConfig, ions: StateVector | DensityMatrix | None = None) -> ProtocolReport:
    space = cfg.space()
    obs = standard_observables(space, cfg.target)
    watch = Operator.identity(space) - qubit_subspace_projector(space)
    gates = gate_configs(cfg)
    if cfg.gate_model == "ideal":
        gate_segs = {k: Segment(ms_effective_hamiltonian(g, space), (), g.duration, cfg.record_stride, label=k)
                     for k, g in gates.items()}
        unitaries = {}
    else:
        gate_segs = {}
        unitaries = {k: ms_propagator(g, space) for k, g in gates.items()}
    repump = Segment(None, tuple(repump_jumps(cfg, space)), cfg.cap, label="repump",
                     max_step=0.05 / cfg.gamma_repump)
    rho = initial_state(space, ions)
    log = _Log()
    log.add_point(0.0, _snapshot(rho, obs))
    log.t = 0.0
    step_times, step_fids, undepleted, repump_times = [], [], 0, []

    def apply_gate(name: str, rho: DensityMatrix) -> DensityMatrix:
        if name in gate_segs:
            traj = evolve(SegmentSchedule((gate_segs[name],), rho), cfg.dt, obs)
            log.add(traj)
            return traj.final_state
        u = unitaries[name].data
        out = DensityMatrix(space, u @ rho.data @ u.conj().T, check=False)
        log.add_point(gates[name].duration, _snapshot(out, obs))
        return out

    for _ in range(cfg.cycles):
        for qubit_gate in ("ms_achiral", "ms_chiral"):
            rho = apply_gate(qubit_gate, rho)
            rho = apply_gate("ms_up_r", rho)
            res = depletion_evolve(repump, rho, watch, cfg.depletion_threshold, min(cfg.dt, repump.max_step),
                                   cfg.cap)
            undepleted += not res.depleted
            rho = res.state
            log.add_point(res.elapsed, _snapshot(rho, obs))
            repump_times.append(res.elapsed)
            step_times.append(log.t)
            step_fids.append(log.obs["fidelity"][-1][0])
    traj = log.trajectory(rho)
    meta = {
        "repumping_steps": cfg.repumping_steps,
        "ms_gates": 4 * cfg.cycles,
        "gate_model": cfg.gate_model,
        "undepleted_repumps": undepleted,
        "max_repump_time_us": max(repump_times) / US,
    }
    return ProtocolReport(traj, np.array(step_times), np.array(step_fids), cfg.target, meta)


def basis_convergence(cfg: SchemeAConfig) -> tuple[list[str], np.ndarray]:
    """Target fidelity after ``cfg.cycles`` cycles from each of the 64 basis states.

    The adjoint pass needs fixed durations, so every repump runs for the time a fully
    shelved ion needs to reach the depletion threshold.
    """
    if cfg.gate_model != "ideal":
        raise ValueError("basis_convergence uses the ideal gate model")
    space = cfg.space()
    gates = gate_configs(cfg)
    seg = {k: Segment(ms_effective_hamiltonian(g, space), (), g.duration, label=k) for k, g in gates.items()}
    rep = Segment(None, tuple(repump_jumps(cfg, space)), cfg.fixed_repump_time, label="repump")
    cycle = (seg["ms_achiral"], seg["ms_up_r"], rep, seg["ms_chiral"], seg["ms_up_r"], rep)
    dt = min(cfg.dt, 0.05 / cfg.gamma_repump)
    pulled = evolve_adjoint(cycle * cfg.cycles, w_projector(cfg.target, space), dt)
    names, fids = [], []
    for name, rho in basis_states():
        names.append(name)
        fids.append(float(np.real(np.sum(pulled.data.T * initial_state(space, rho).data))))
    return names, np.array(fids)
