"""Off-resonant photon scattering during the Raman beams.

Ions carry three levels (down, up, L) where L collects every state outside the qubit
manifold. Jump operators per ion: leakage L<-up and L<-down, Raman flips, Rayleigh
dephasing on the qubit, and optionally a repump down<-L. Recoil from all scattering
events heats the driven mode through a global a / a^dagger pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from typing import Sequence

import numpy as np

from ..lindblad import JumpOperator
from ..qcore import HilbertSpace, annihilation, embed, transition

DOWN, UP, LEAK = 0, 1, 2
RAYLEIGH_DIFF_RATIO = 2e-4
RAYLEIGH_TOTAL_RATIO = 174.0


@dataclass(frozen=True)
class ScatteringRates:
    gamma_leak: float
    gamma_flip_up_down: float = 0.0
    gamma_flip_down_up: float = 0.0
    gamma_rayleigh_diff: float | None = None
    gamma_rayleigh_total: float | None = None
    recoil_factor: float = 1.0
    eta: float = 0.24
    tau_rep: float | None = None

    def __post_init__(self) -> None:
        if self.gamma_rayleigh_diff is None:
            object.__setattr__(self, "gamma_rayleigh_diff", RAYLEIGH_DIFF_RATIO * self.gamma_leak)
        if self.gamma_rayleigh_total is None:
            object.__setattr__(self, "gamma_rayleigh_total", RAYLEIGH_TOTAL_RATIO * self.gamma_leak)
        for name in ("gamma_leak", "gamma_flip_up_down", "gamma_flip_down_up", "gamma_rayleigh_diff",
                     "gamma_rayleigh_total", "recoil_factor", "eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.tau_rep is not None and not self.tau_rep > 0:
            raise ValueError("tau_rep must be positive (or None for no repump)")

    def total_rate(self, n_ions: int) -> float:
        """Scattering events per second across the crystal, repump photons included."""
        per_ion = (self.gamma_leak + 0.5 * (self.gamma_flip_up_down + self.gamma_flip_down_up)
                   + self.gamma_rayleigh_total)
        # in steady state each leakage event is followed by one repump photon
        repump = self.gamma_leak if self.tau_rep is not None else 0.0
        return n_ions * (per_ion + repump)

    def recoil_rate(self, n_ions: int) -> float:
        return self.recoil_factor * self.eta**2 * self.total_rate(n_ions)


def build_scattering_jumps(rates: ScatteringRates, space: HilbertSpace) -> list[JumpOperator]:
    ions = space.ion_indices
    for j in ions:
        if space.dims[j] != 3:
            raise ValueError(f"scattering needs three-level ions (down, up, L); factor {j} has {space.dims[j]}")
    out: list[JumpOperator] = []

    def add(rate: float, local: np.ndarray, j: int, name: str) -> None:
        if rate > 0:
            out.append(JumpOperator.with_rate(rate, embed(local, j, space), name))

    sz = np.diag([-1.0, 1.0, 0.0]).astype(complex)
    for j in ions:
        add(rates.gamma_leak, transition(LEAK, UP, 3), j, f"leak_up_{j}")
        add(rates.gamma_leak, transition(LEAK, DOWN, 3), j, f"leak_down_{j}")
        add(rates.gamma_flip_up_down, transition(DOWN, UP, 3), j, f"flip_ud_{j}")
        add(rates.gamma_flip_down_up, transition(UP, DOWN, 3), j, f"flip_du_{j}")
        add(rates.gamma_rayleigh_diff / 2, sz, j, f"rayleigh_{j}")
        if rates.tau_rep is not None:
            add(1 / rates.tau_rep, transition(DOWN, LEAK, 3), j, f"repump_{j}")
    m = space.motional_index
    g = rates.recoil_rate(len(ions))
    if m is not None and g > 0:
        a = embed(annihilation(space.dims[m] - 1), m, space)
        out.append(JumpOperator.with_rate(g, a, "recoil_a"))
        out.append(JumpOperator.with_rate(g, a.dag(), "recoil_adag"))
    return out


# ---------------------------------------------------------------- calibrated preset

PRESET_FILE = "scattering_preset.json"


@dataclass(frozen=True)
class ScatteringPreset:
    rates: ScatteringRates
    tau_rep: float
    n_max: int
    dt: float
    iterations: int
    record_stride: float
    provenance: dict

    def with_repump(self) -> ScatteringRates:
        return replace(self.rates, tau_rep=self.tau_rep)


def load_preset(path=None) -> ScatteringPreset:
    if path is None:
        text = resources.files("wstate").joinpath("data", PRESET_FILE).read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    d = json.loads(text)
    rates = ScatteringRates(
        gamma_leak=d["gamma_leak_per_s"],
        gamma_flip_up_down=d["gamma_flip_up_down_per_s"],
        gamma_flip_down_up=d["gamma_flip_down_up_per_s"],
        recoil_factor=d["recoil_factor"],
        eta=d["eta"],
        tau_rep=None,
    )
    return ScatteringPreset(rates, d["tau_rep_us"] * 1e-6, d["n_max"], d["dt_ns"] * 1e-9,
                            d["iterations"], d["record_stride_us"] * 1e-6, d["provenance"])


def calibrate_leak_rate(target_peak: float = 0.986, bracket: Sequence[float] = (0.5, 20.0),
                        n_max: int = 4, dt: float = 1e-7, iterations: int = 11,
                        record_stride: float = 1e-6, tol: float = 1e-3, log=print) -> tuple[float, list]:
    """Bisect gamma_leak so the no-repump Scheme B run peaks at ``target_peak``.

    Returns the rate and the bisection history [(gamma, peak fidelity, peak time)].
    """
    from .scheme_b import SchemeBConfig, run_scheme_b

    def peak(g: float):
        cfg = SchemeBConfig(iterations=iterations, n_max=n_max, dt=dt, record_stride=record_stride,
                            scattering=ScatteringRates(gamma_leak=g))
        rep = run_scheme_b(cfg)
        f, t = rep.peak
        log(f"gamma_leak = {g:.6g} /s -> peak {f:.6f} at {t * 1e6:.1f} us")
        return f, t

    lo, hi = bracket
    history = []
    f_lo, t_lo = peak(lo)
    f_hi, t_hi = peak(hi)
    history += [(lo, f_lo, t_lo), (hi, f_hi, t_hi)]
    if not (f_lo > target_peak > f_hi):
        raise ValueError(f"bracket does not straddle the target peak: {f_lo:.5f}, {f_hi:.5f}")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        f, t = peak(mid)
        history.append((mid, f, t))
        if f > target_peak:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), history


def preset_record(gamma_leak: float, history: list, n_max: int, dt: float, iterations: int,
                  record_stride: float, tau_rep: float = 10e-6) -> dict:
    return {
        "gamma_leak_per_s": gamma_leak,
        "gamma_flip_up_down_per_s": 0.0,
        "gamma_flip_down_up_per_s": 0.0,
        "rayleigh_diff_ratio": RAYLEIGH_DIFF_RATIO,
        "rayleigh_total_ratio": RAYLEIGH_TOTAL_RATIO,
        "recoil_factor": 1.0,
        "eta": 0.24,
        "tau_rep_us": tau_rep * 1e6,
        "n_max": n_max,
        "dt_ns": dt * 1e9,
        "iterations": iterations,
        "record_stride_us": record_stride * 1e6,
        "provenance": {
            "method": "bisection of gamma_leak on the peak W1+ fidelity of the no-repump Scheme B run",
            "target_peak_fidelity": 0.986,
            "target_peak_time_us": 1065,
            "flip_rates": "set to zero; their effect is absorbed into gamma_leak",
            "history": [{"gamma_leak_per_s": g, "peak": f, "peak_time_us": t * 1e6} for g, f, t in history],
            "generator": "python -m wstate.protocols.calibrate",
            "version": 1,
        },
    }

