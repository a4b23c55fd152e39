"""Sympathetic-cooling scheme: alternate an achiral MS gate with a chiral sideband
applied together with cooling of the shared mode.

Each iteration is two segments. The MS segment moves 75 % of |W00> to |W20> (or
|W30> to |W10>); the sideband then converts that into the chiral target plus one
phonon, which the cooling jump sqrt(kappa) a removes. The chiral target with the mode
in its ground state is dark under both steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..couplings import (
    CalibrationError,
    IonDrivePhase,
    MSConfig,
    SidebandConfig,
    apply_calibration_error,
    ms_effective_hamiltonian,
    ms_hamiltonian_terms,
    sideband_hamiltonian,
)
from ..lindblad import (
    JumpOperator,
    Segment,
    SegmentSchedule,
    TimeDependentHamiltonian,
    evolve,
    evolve_adjoint,
)
from ..qcore import DensityMatrix, HilbertSpace, Operator, StateVector, annihilation, embed
from ..wbasis import WLabel, w_state
from .common import ProtocolReport, initial_state, standard_observables, w_projector
from .scattering import ScatteringRates, build_scattering_jumps

US = 1e-6


@dataclass(frozen=True)
class TargetSettings:
    ms_delta_s: int
    sideband_kind: Literal["red", "blue"]
    sideband_delta_s: int
    source: WLabel  # achiral state the sideband converts into the target


def target_selection(label: WLabel) -> TargetSettings:
    """Gate and sideband choices that make ``label`` the dark, reachable state.

    W1(s): red sideband with chirality change -s fed from W20. W2(s) mirrors this under
    a global spin flip: blue sideband with chirality change +s fed from W10.
    """
    if not label.chiral:
        raise ValueError(f"{label} is achiral; only chiral W states can be prepared this way")
    if label.n_up == 1:
        return TargetSettings(0, "red", -label.s, WLabel(2, 0))
    return TargetSettings(0, "blue", label.s, WLabel(1, 0))


@dataclass(frozen=True)
class SchemeBConfig:
    target: WLabel = WLabel(1, 1)
    iterations: int = 20
    sideband_pi_time: float = 30 * US
    t_sc: float = 150 * US
    kappa: float = 2 / (30 * US)
    gamma_amb: float = 0.0
    gamma_gsc: float = 0.0
    calibration: CalibrationError = field(default_factory=CalibrationError)
    scattering: ScatteringRates | None = None
    n_max: int = 6
    ms_model: Literal["effective", "full"] = "effective"
    dt: float = 100e-9
    ms_max_step: float = 10e-9
    record_stride: float | None = 1 * US

    def __post_init__(self) -> None:
        if not isinstance(self.target, WLabel):
            object.__setattr__(self, "target", WLabel(*self.target))
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        for name in ("sideband_pi_time", "t_sc"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("kappa", "gamma_amb", "gamma_gsc"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.ms_model not in ("effective", "full"):
            raise ValueError("ms_model must be 'effective' or 'full'")
        target_selection(self.target)

    @property
    def sideband_rabi(self) -> float:
        return math.pi / self.sideband_pi_time

    @property
    def ms_rabi(self) -> float:
        # half the power of one Raman beam drives each MS sideband
        return self.sideband_rabi / math.sqrt(2)

    @property
    def t_ms(self) -> float:
        return 2 * math.pi / (2 * self.ms_rabi)

    @property
    def period(self) -> float:
        return self.t_ms + self.t_sc

    @property
    def levels(self) -> int:
        return 3 if self.scattering is not None else 2

    def space(self) -> HilbertSpace:
        return HilbertSpace.ions(3, self.levels, self.n_max)


def _mode_jumps(space: HilbertSpace, rate: float, name: str, lower_only: bool = False) -> list[JumpOperator]:
    if rate <= 0:
        return []
    a = embed(annihilation(space.n_max), space.motional_index, space)
    out = [JumpOperator.with_rate(rate, a, f"{name}_a")]
    if not lower_only:
        out.append(JumpOperator.with_rate(rate, a.dag(), f"{name}_adag"))
    return out


def sideband_config(cfg: SchemeBConfig) -> SidebandConfig:
    ts = target_selection(cfg.target)
    sb = SidebandConfig.chiral(ts.sideband_kind, cfg.sideband_rabi, ts.sideband_delta_s)
    return apply_calibration_error(sb, cfg.calibration)


def ms_config(cfg: SchemeBConfig) -> MSConfig:
    ts = target_selection(cfg.target)
    # MS labelled by the chain it drives; its sideband phases carry -delta_s
    return MSConfig.ideal(cfg.ms_rabi, IonDrivePhase.chiral(-ts.ms_delta_s))


def iteration_segments(cfg: SchemeBConfig, space: HilbertSpace | None = None) -> tuple[Segment, Segment]:
    """(MS segment, sideband + cooling segment) for one iteration."""
    space = space or cfg.space()
    scat = build_scattering_jumps(cfg.scattering, space) if cfg.scattering is not None else []
    amb = _mode_jumps(space, cfg.gamma_amb, "heat_amb")
    ms = ms_config(cfg)
    if cfg.ms_model == "effective":
        ms_seg = Segment(ms_effective_hamiltonian(ms, space), tuple(amb + scat), ms.duration,
                         cfg.record_stride, label="ms")
    else:
        h = TimeDependentHamiltonian(tuple(ms_hamiltonian_terms(ms, space)))
        ms_seg = Segment(h, tuple(amb + scat), ms.duration, cfg.record_stride, cfg.ms_max_step, label="ms")
    cool = _mode_jumps(space, cfg.kappa, "cool", lower_only=True)
    gsc = _mode_jumps(space, cfg.gamma_gsc, "heat_gsc")
    sb_seg = Segment(sideband_hamiltonian(sideband_config(cfg), space), tuple(cool + gsc + amb + scat),
                     cfg.t_sc, cfg.record_stride, label="sideband_cooling")
    return ms_seg, sb_seg


def build_schedule(cfg: SchemeBConfig, ions: StateVector | DensityMatrix | None = None) -> SegmentSchedule:
    space = cfg.space()
    ms_seg, sb_seg = iteration_segments(cfg, space)
    return SegmentSchedule((ms_seg, sb_seg) * cfg.iterations, initial_state(space, ions))


def top_fock_projector(space: HilbertSpace, levels: int = 2) -> Operator:
    m = space.motional_index
    d = np.zeros(space.dims[m])
    d[-levels:] = 1.0
    return embed(np.diag(d), m, space)


def run_scheme_b(cfg: SchemeBConfig, ions: StateVector | DensityMatrix | None = None) -> ProtocolReport:
    """Run ``cfg.iterations`` iterations from ``ions`` (default |W00>) with the mode cold."""
    sched = build_schedule(cfg, ions)
    space = sched.initial.space
    obs = standard_observables(space, cfg.target)
    obs["p_top2"] = top_fock_projector(space)
    traj = evolve(sched, cfg.dt, obs)
    ends = np.array(traj.segment_ends[1::2])
    ts = target_selection(cfg.target)
    meta = {
        "t_ms_us": cfg.t_ms / US,
        "t_sc_us": cfg.t_sc / US,
        "iteration_period_us": cfg.period / US,
        "heating_quanta_per_iteration": cfg.gamma_amb * cfg.period,
        "n_gsc": cfg.gamma_gsc / cfg.kappa if cfg.kappa else float("inf"),
        "sideband": f"{ts.sideband_kind}, chirality change {ts.sideband_delta_s:+d}",
        "max_top2_fock": float(traj["p_top2"].max()),
    }
    return ProtocolReport(traj, traj.times[ends], traj["fidelity"][ends], cfg.target, meta)


def single_pass_transfer(cfg: SchemeBConfig) -> float:
    """Target population after one sideband + cooling step started from the source state."""
    space = cfg.space()
    _, sb_seg = iteration_segments(cfg, space)
    src = target_selection(cfg.target).source
    sched = SegmentSchedule((sb_seg,), initial_state(space, w_state(src)))
    traj = evolve(sched, cfg.dt, {"fidelity": w_projector(cfg.target, space)})
    return float(traj["fidelity"][-1])


PAULI_PREP = {
    "down": np.array([1, 0], dtype=complex),
    "up": np.array([0, 1], dtype=complex),
    "plus": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "plus_i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
}


def basis_states() -> list[tuple[str, DensityMatrix]]:
    """The 64 product states built from {down, up, +, +i} on each ion.

    Their density matrices span all three-qubit operators, so convergence of every one
    of them implies convergence from any initial qubit state.
    """
    space = HilbertSpace.ions(3)
    out = []
    for a in PAULI_PREP:
        for b in PAULI_PREP:
            for c in PAULI_PREP:
                v = np.kron(np.kron(PAULI_PREP[a], PAULI_PREP[b]), PAULI_PREP[c])
                out.append((f"{a},{b},{c}", DensityMatrix(space, np.outer(v, v.conj()))))
    return out


def basis_convergence(cfg: SchemeBConfig) -> tuple[list[str], np.ndarray]:
    """Target fidelity after ``cfg.iterations`` from each of the 64 basis states.

    Uses one adjoint pass: the target projector is pulled back through the whole
    schedule and then contracted with every initial state.
    """
    if cfg.ms_model != "effective":
        raise ValueError("basis_convergence needs constant segments (ms_model='effective')")
    space = cfg.space()
    ms_seg, sb_seg = iteration_segments(cfg, space)
    pulled = evolve_adjoint((ms_seg, sb_seg) * cfg.iterations, w_projector(cfg.target, space), cfg.dt)
    names, fids = [], []
    for name, rho in basis_states():
        r0 = initial_state(space, rho)
        names.append(name)
        fids.append(float(np.real(np.sum(pulled.data.T * r0.data))))
    return names, np.array(fids)
