"""Laser-driven couplings: resonant sidebands, the Molmer-Sorensen interaction,
its ideal closure-time propagator, and calibration-error perturbations.

Phase bookkeeping: each driven ion j carries a complex prefactor
``sign_j * exp(i (phi_j + global_phase))`` on its sigma_plus term. A drive has
chirality change ds when these effective phases step by ``ds * 2pi/3`` from ion
to ion (up to a common offset).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Literal, Sequence

import numpy as np

from .qcore import HBAR, HilbertSpace, Operator, annihilation, embed, propagator, transition

TWO_PI_3 = 2 * np.pi / 3


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class IonDrivePhase:
    phases: tuple[float, ...]
    signs: tuple[int, ...] | None = None
    global_phase: float = 0.0

    def __post_init__(self) -> None:
        ph = tuple(float(p) for p in self.phases)
        signs = tuple(int(s) for s in self.signs) if self.signs is not None else (1,) * len(ph)
        if len(signs) != len(ph):
            raise ValueError("need one sign per driven ion")
        if any(s not in (-1, 1) for s in signs):
            raise ValueError("signs must be +1 or -1")
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "signs", signs)

    @classmethod
    def chiral(cls, delta_s: int, n_ions: int = 3, global_phase: float = 0.0) -> "IonDrivePhase":
        """Center-referenced phases ``delta_s * 2pi/3 * (j - center)``."""
        c = (n_ions - 1) / 2
        return cls(tuple(delta_s * TWO_PI_3 * (j - c) for j in range(n_ions)), None, global_phase)

    @classmethod
    def from_geometry(cls, delta_k: float, positions: Sequence[float], amplitudes: Sequence[float],
                      global_phase: float = 0.0) -> "IonDrivePhase":
        """phi_j = delta_k * Z_j and sign_j = sign of the ion's mode amplitude."""
        ph = tuple(float(delta_k * z) for z in positions)
        signs = tuple(1 if a >= 0 else -1 for a in amplitudes)
        return cls(ph, signs, global_phase)

    @property
    def n_ions(self) -> int:
        return len(self.phases)

    def factors(self) -> np.ndarray:
        return np.array(self.signs) * np.exp(1j * (np.array(self.phases) + self.global_phase))

    def effective_phases(self) -> np.ndarray:
        return np.angle(self.factors())

    def chirality(self, tol: float = 1e-9) -> int | None:
        """Chirality change realized by these phases, or None if they match none."""
        for ds in (-1, 0, 1):
            if self.matches(ds, tol):
                return ds
        return None

    def matches(self, delta_s: int, tol: float = 1e-9) -> bool:
        eff = self.effective_phases()
        c = (self.n_ions - 1) // 2
        want = np.array([delta_s * TWO_PI_3 * (j - c) for j in range(self.n_ions)])
        return bool(np.all(np.abs(_wrap(eff - eff[c] - want)) < tol))


def _check_levels(space: HilbertSpace, ions: Sequence[int], levels: tuple[int, int]) -> None:
    lo, hi = levels
    for j in ions:
        if j not in space.ion_indices:
            raise ValueError(f"factor {j} is not an ion factor")
        d = space.dims[j]
        if not (0 <= lo < d and 0 <= hi < d) or lo == hi:
            raise ValueError(f"transition {levels} does not fit ion factor {j} of dimension {d}")


def _raising(space: HilbertSpace, ion: int, levels: tuple[int, int]) -> np.ndarray:
    lo, hi = levels
    return embed(transition(hi, lo, space.dims[ion]), ion, space).data


def _mode_lowering(space: HilbertSpace) -> np.ndarray:
    m = space.motional_index
    if m is None:
        raise ValueError("space has no motional factor")
    return embed(annihilation(space.factors[m].dim - 1), m, space).data


def _default_ions(space: HilbertSpace, phases: IonDrivePhase) -> tuple[int, ...]:
    ions = space.ion_indices
    if len(ions) != phases.n_ions:
        raise ValueError(f"{phases.n_ions} drive phases given for {len(ions)} ion factors")
    return ions


@dataclass(frozen=True)
class SidebandConfig:
    kind: Literal["red", "blue"]
    rabi: tuple[float, ...]
    phases: IonDrivePhase
    transition: tuple[int, int] = (0, 1)
    chirality_change: int | None = None
    ions: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("red", "blue"):
            raise ValueError(f"sideband kind must be 'red' or 'blue', not {self.kind!r}")
        rabi = tuple(float(r) for r in self.rabi)
        if any(r < 0 for r in rabi):
            raise ValueError("Rabi rates must be nonnegative")
        if len(rabi) != self.phases.n_ions:
            raise ValueError("need one Rabi rate per driven ion")
        object.__setattr__(self, "rabi", rabi)
        if self.chirality_change is not None:
            if self.chirality_change not in (-1, 0, 1):
                raise ValueError("chirality change must be -1, 0 or +1")
            if not self.phases.matches(self.chirality_change):
                raise ValueError(f"phases do not realize chirality change {self.chirality_change}")

    @classmethod
    def chiral(cls, kind: str, rabi: float, delta_s: int, transition=(0, 1)) -> "SidebandConfig":
        return cls(kind, (rabi,) * 3, IonDrivePhase.chiral(delta_s), tuple(transition), delta_s)


def sideband_hamiltonian(cfg: SidebandConfig, space: HilbertSpace) -> Operator:
    """Resonant interaction-picture sideband coupling, in joules.

    blue: sum_j |Omega_j|/2 f_j sigma_plus^(j) a^dagger + h.c.; red replaces a^dagger by a.
    """
    ions = cfg.ions if cfg.ions is not None else _default_ions(space, cfg.phases)
    _check_levels(space, ions, cfg.transition)
    a = _mode_lowering(space)
    mode_op = a.conj().T if cfg.kind == "blue" else a
    f = cfg.phases.factors()
    half = np.zeros((space.dim, space.dim), dtype=complex)
    for j, ion in enumerate(ions):
        if cfg.rabi[j] == 0:
            continue
        half += 0.5 * cfg.rabi[j] * f[j] * _raising(space, ion, cfg.transition)
    half = half @ mode_op
    return Operator(space, HBAR * (half + half.conj().T))


@dataclass(frozen=True)
class MSConfig:
    rabi: float
    detuning: float
    duration: float
    phases: IonDrivePhase
    transition: tuple[int, int] = (0, 1)
    ions: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("MS duration must be positive")
        if self.detuning == 0:
            raise ValueError("MS detuning must be nonzero")

    @classmethod
    def ideal(cls, rabi: float, phases: IonDrivePhase, transition=(0, 1), ions=None) -> "MSConfig":
        """delta = 2 Omega and T = 2pi/delta: maximal transfer, motion disentangled."""
        delta = 2 * rabi
        return cls(rabi, delta, 2 * np.pi / delta, phases, tuple(transition), ions)

    @property
    def u(self) -> complex:
        return complex(np.exp(2j * self.phases.global_phase))

    @property
    def is_ideal(self) -> bool:
        return (abs(self.detuning - 2 * self.rabi) <= 1e-9 * abs(self.detuning)
                and abs(self.duration - 2 * np.pi / self.detuning) <= 1e-9 * self.duration)


def _ms_parts(cfg: MSConfig, space: HilbertSpace) -> tuple[np.ndarray, np.ndarray]:
    """Return (B, R) with H(t) = hbar (B e^{i delta t} + R e^{-i delta t} + h.c.)."""
    ions = cfg.ions if cfg.ions is not None else _default_ions(space, cfg.phases)
    _check_levels(space, ions, cfg.transition)
    a = _mode_lowering(space)
    f = cfg.phases.factors()
    sp = sum(f[j] * _raising(space, ion, cfg.transition) for j, ion in enumerate(ions))
    half = 0.5 * cfg.rabi * sp
    return half @ a.conj().T, half @ a


def ms_hamiltonian(cfg: MSConfig, space: HilbertSpace, t: float) -> Operator:
    b, r = _ms_parts(cfg, space)
    x = b * np.exp(1j * cfg.detuning * t) + r * np.exp(-1j * cfg.detuning * t)
    return Operator(space, HBAR * (x + x.conj().T))


def ms_hamiltonian_terms(cfg: MSConfig, space: HilbertSpace) -> list[tuple[Operator, Callable[[float], complex]]]:
    """H(t) as a sum of constant operators times scalar envelopes (for fast sampling)."""
    b, r = _ms_parts(cfg, space)
    d = cfg.detuning
    return [
        (Operator(space, HBAR * b), lambda t: np.exp(1j * d * t)),
        (Operator(space, HBAR * b.conj().T), lambda t: np.exp(-1j * d * t)),
        (Operator(space, HBAR * r), lambda t: np.exp(-1j * d * t)),
        (Operator(space, HBAR * r.conj().T), lambda t: np.exp(1j * d * t)),
    ]


def ms_spin_operator(phases: IonDrivePhase, space: HilbertSpace, transition=(0, 1), ions=None) -> Operator:
    """S = sum_j (f_j sigma_plus^(j) + h.c.) on the chosen transition."""
    ions = ions if ions is not None else _default_ions(space, phases)
    _check_levels(space, ions, tuple(transition))
    f = phases.factors()
    sp = sum(f[j] * _raising(space, ion, tuple(transition)) for j, ion in enumerate(ions))
    return Operator(space, sp + sp.conj().T)


def ms_effective_hamiltonian(cfg: MSConfig, space: HilbertSpace) -> Operator:
    """Spin-only generator -hbar Omega^2 S^2 / (4 delta).

    At every closure time 2pi m/delta the full interaction reduces to the propagator
    of this Hamiltonian; at delta = 2 Omega, T = 2pi/delta it is exp(i pi S^2 / 8).
    """
    s = ms_spin_operator(cfg.phases, space, cfg.transition, cfg.ions)
    return Operator(space, -HBAR * cfg.rabi**2 / (4 * cfg.detuning) * (s.data @ s.data))


def ms_ideal_propagator(u: complex, delta_s: int, transition=(0, 1), levels: int = 2,
                        n_ions: int = 3) -> Operator:
    """Closure-time MS propagator exp(+i pi S^2 / 8) on the ion space.

    ``delta_s`` labels the gate by the chain it drives, W00 <-> W2(delta_s); the
    underlying sideband phases therefore carry chirality change -delta_s.
    """
    if abs(abs(u) - 1) > 1e-12:
        raise ValueError("|u| must be 1")
    if delta_s not in (-1, 0, 1):
        raise ValueError("delta_s must be -1, 0 or +1")
    space = HilbertSpace.ions(n_ions, levels)
    phases = IonDrivePhase.chiral(-delta_s, n_ions, global_phase=float(np.angle(u)) / 2)
    s = ms_spin_operator(phases, space, transition)
    return propagator(Operator(space, -HBAR * np.pi / 8 * (s.data @ s.data)), 1.0)


@dataclass(frozen=True)
class CalibrationError:
    delta_phi: float = 0.0
    rabi_center_ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.rabi_center_ratio <= 0:
            raise ValueError("rabi_center_ratio must be positive")

    @property
    def is_null(self) -> bool:
        return self.delta_phi == 0 and self.rabi_center_ratio == 1


def apply_calibration_error(cfg: SidebandConfig, err: CalibrationError) -> SidebandConfig:
    """Shift the outer-ion phases apart by delta_phi and rebalance the Rabi rates.

    The phase step between neighbouring ions grows in magnitude by delta_phi (its sign
    follows the configured chirality, +1 for an achiral drive); the center ion's Rabi
    rate becomes ``ratio * mean`` with the outer ions sharing the remainder equally.
    """
    if cfg.phases.n_ions != 3:
        raise ValueError("the calibration error model needs exactly three driven ions")
    if err.is_null:
        return cfg
    step_sign = cfg.chirality_change if cfg.chirality_change else 1
    shift = tuple(step_sign * err.delta_phi * (j - 1) for j in range(3))
    phases = replace(cfg.phases, phases=tuple(p + s for p, s in zip(cfg.phases.phases, shift)))
    avg = float(np.mean(cfg.rabi))
    outer = (3 - err.rabi_center_ratio) / 2
    rabi = (avg * outer, avg * err.rabi_center_ratio, avg * outer)
    ds = cfg.chirality_change if (cfg.chirality_change is not None and phases.matches(cfg.chirality_change)) else None
    return replace(cfg, phases=phases, rabi=rabi, chirality_change=ds)


def rabi_from_lamb_dicke(base_rabi: float, eta: Sequence[float]) -> tuple[float, ...]:
    """|Omega_j| = base carrier Rabi rate times the ion's Lamb-Dicke factor."""
    return tuple(float(base_rabi * e) for e in eta)


def ms_propagator(cfg: MSConfig, space: HilbertSpace, max_step: float = 1e-8) -> Operator:
    """Time-ordered propagator of the sampled H_MS over ``cfg.duration``.

    With equal Rabi rates H_MS(t) = hbar Omega/2 * S (x) (a^dag e^{i delta t} + a e^{-i delta t}),
    so every eigenspace of S sees a driven oscillator; each distinct eigenvalue's motional
    propagator is integrated with RK4 and the blocks are reassembled.
    """
    m = space.motional_index
    if m is None or m != len(space.factors) - 1:
        raise ValueError("ms_propagator needs the motional factor last")
    ion_space = HilbertSpace(space.factors[:-1])
    s = ms_spin_operator(cfg.phases, ion_space, cfg.transition, cfg.ions)
    lam, vec = np.linalg.eigh(s.data)
    n_mode = space.dims[m]
    a = annihilation(n_mode - 1).data
    steps = max(1, int(np.ceil(cfg.duration / max_step - 1e-9)))
    h = cfg.duration / steps
    d = cfg.detuning

    def motion_u(l: float) -> np.ndarray:
        def rhs(t, y):
            x = a.conj().T * np.exp(1j * d * t) + a * np.exp(-1j * d * t)
            return -1j * 0.5 * cfg.rabi * l * (x @ y)
        y = np.eye(n_mode, dtype=complex)
        for k in range(steps):
            t = k * h
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return y

    cache: dict[float, np.ndarray] = {}
    u = np.zeros((space.dim, space.dim), dtype=complex)
    for j, l in enumerate(lam):
        key = round(float(l), 9)
        if key not in cache:
            cache[key] = motion_u(l)
        p = np.outer(vec[:, j], vec[:, j].conj())
        u += np.kron(p, cache[key])
    return Operator(space, u)
