"""Protocol runners for chiral W-state preparation."""

from .common import ProtocolReport, initial_state, standard_observables, w_projector
from .scattering import ScatteringPreset, ScatteringRates, build_scattering_jumps, load_preset
from .scheme_a import SchemeAConfig, run_scheme_a
from .scheme_b import SchemeBConfig, TargetSettings, run_scheme_b, single_pass_transfer, target_selection

__all__ = [
    "ProtocolReport",
    "ScatteringPreset",
    "ScatteringRates",
    "SchemeAConfig",
    "SchemeBConfig",
    "TargetSettings",
    "build_scattering_jumps",
    "initial_state",
    "load_preset",
    "run_scheme_a",
    "run_scheme_b",
    "single_pass_transfer",
    "standard_observables",
    "target_selection",
    "w_projector",
]
