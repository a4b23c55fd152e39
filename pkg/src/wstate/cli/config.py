"""JSON scenario files.

Every number carries its unit in the field name. Parsing goes through pydantic, and the
resulting sections are then converted into the library's config objects so that their
own invariants are checked before anything runs. Both kinds of failure surface as
ConfigError with a dotted field path.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .. import crystal
from ..couplings import CalibrationError
from ..protocols.scattering import ScatteringRates, load_preset
from ..protocols.scheme_a import SchemeAConfig
from ..protocols.scheme_b import SchemeBConfig
from ..wbasis import WLabel

US = 1e-6
NS = 1e-9


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _label(tag: str, path: str) -> WLabel:
    try:
        return WLabel.parse(tag)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _target(tag: str, path: str, one_excitation: bool = False) -> WLabel:
    label = _label(tag, path)
    if not label.chiral or (one_excitation and label.n_up != 1):
        allowed = "W1p or W1m" if one_excitation else "W1p, W1m, W2p or W2m"
        raise ConfigError(path, f"target {tag!r} cannot be prepared; use {allowed}")
    return label


class CalibrationSection(_Strict):
    delta_phi_rad: float = 0.0
    rabi_center_ratio: float = Field(1.0, gt=0.0, lt=3.0)


class ScatteringSection(_Strict):
    use_preset: bool = False
    gamma_leak_per_s: Optional[float] = Field(None, ge=0)
    gamma_flip_up_down_per_s: float = Field(0.0, ge=0)
    gamma_flip_down_up_per_s: float = Field(0.0, ge=0)
    gamma_rayleigh_diff_per_s: Optional[float] = Field(None, ge=0)
    gamma_rayleigh_total_per_s: Optional[float] = Field(None, ge=0)
    recoil_factor: float = Field(1.0, ge=0)
    eta: float = Field(0.24, ge=0)
    tau_rep_us: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _source(self):
        if self.use_preset == (self.gamma_leak_per_s is not None):
            raise ValueError("set exactly one of use_preset=true or gamma_leak_per_s")
        return self

    def to_rates(self) -> ScatteringRates:
        tau = None if self.tau_rep_us is None else self.tau_rep_us * US
        if self.use_preset:
            return replace(load_preset().rates, tau_rep=tau)
        return ScatteringRates(
            gamma_leak=self.gamma_leak_per_s,
            gamma_flip_up_down=self.gamma_flip_up_down_per_s,
            gamma_flip_down_up=self.gamma_flip_down_up_per_s,
            gamma_rayleigh_diff=self.gamma_rayleigh_diff_per_s,
            gamma_rayleigh_total=self.gamma_rayleigh_total_per_s,
            recoil_factor=self.recoil_factor,
            eta=self.eta,
            tau_rep=tau,
        )


class SchemeBSection(_Strict):
    target: str = "W1p"
    initial: str = "W00"
    iterations: int = Field(20, ge=1)
    sideband_pi_time_us: float = Field(30.0, gt=0)
    t_sc_us: float = Field(150.0, gt=0)
    kappa_per_s: float = Field(2 / (30 * US), ge=0)
    gamma_amb_per_s: float = Field(0.0, ge=0)
    gamma_gsc_per_s: Optional[float] = Field(None, ge=0)
    n_gsc: Optional[float] = Field(None, ge=0)
    calibration: CalibrationSection = CalibrationSection()
    scattering: Optional[ScatteringSection] = None
    n_max: int = Field(6, ge=1)
    ms_model: Literal["effective", "full"] = "effective"
    dt_ns: float = Field(100.0, gt=0)
    ms_max_step_ns: float = Field(10.0, gt=0)
    record_stride_us: Optional[float] = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _gsc(self):
        if self.gamma_gsc_per_s is not None and self.n_gsc is not None:
            raise ValueError("give the cooling-step heating as gamma_gsc_per_s or n_gsc, not both")
        return self

    def to_config(self, path: str = "scheme_b") -> SchemeBConfig:
        gsc = self.gamma_gsc_per_s
        if self.n_gsc is not None:
            gsc = self.n_gsc * self.kappa_per_s
        try:
            return SchemeBConfig(
                target=_target(self.target, f"{path}.target"),
                iterations=self.iterations,
                sideband_pi_time=self.sideband_pi_time_us * US,
                t_sc=self.t_sc_us * US,
                kappa=self.kappa_per_s,
                gamma_amb=self.gamma_amb_per_s,
                gamma_gsc=gsc or 0.0,
                calibration=CalibrationError(self.calibration.delta_phi_rad, self.calibration.rabi_center_ratio),
                scattering=None if self.scattering is None else self.scattering.to_rates(),
                n_max=self.n_max,
                ms_model=self.ms_model,
                dt=self.dt_ns * NS,
                ms_max_step=self.ms_max_step_ns * NS,
                record_stride=None if self.record_stride_us is None else self.record_stride_us * US,
            )
        except ConfigError:
            raise
        except (ValueError, OSError) as exc:
            raise ConfigError(path, str(exc)) from None


class SchemeASection(_Strict):
    target: str = "W1p"
    initial: str = "W00"
    cycles: int = Field(50, ge=1)
    gamma_repump_per_s: float = Field(1e6, gt=0)
    branching: tuple[float, float, float] = (5 / 12, 1 / 3, 1 / 4)
    gate_model: Literal["ideal", "full"] = "ideal"
    gate_time_us: float = Field(math.sqrt(2) * 30, gt=0)
    n_max: int = Field(10, ge=1)
    depletion_threshold: float = Field(1e-6, gt=0, lt=1)
    cap_factor: float = Field(50.0, gt=0)
    dt_ns: float = Field(100.0, gt=0)
    record_stride_us: Optional[float] = Field(1.0, gt=0)

    def to_config(self, path: str = "scheme_a") -> SchemeAConfig:
        try:
            return SchemeAConfig(
                target=_target(self.target, f"{path}.target", one_excitation=True),
                cycles=self.cycles,
                gamma_repump=self.gamma_repump_per_s,
                branching=tuple(self.branching),
                gate_model=self.gate_model,
                gate_time=self.gate_time_us * US,
                n_max=self.n_max,
                depletion_threshold=self.depletion_threshold,
                cap_factor=self.cap_factor,
                dt=self.dt_ns * NS,
                record_stride=None if self.record_stride_us is None else self.record_stride_us * US,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None


class TuneSection(_Strict):
    mode: Union[Literal["highest", "lowest"], int] = "highest"
    qubits: Optional[list[int]] = None
    k2_bracket_uV_per_um2: Optional[tuple[float, float]] = None


class ModesSection(_Strict):
    chain: str
    mass_model: Literal["mass_number", "isotopic"] = "mass_number"
    k4_uV_per_um4: float = 0.0
    k2_uV_per_um2: Optional[float] = None
    tune: Optional[TuneSection] = None

    @model_validator(mode="after")
    def _one(self):
        if (self.k2_uV_per_um2 is None) == (self.tune is None):
            raise ValueError("set exactly one of k2_uV_per_um2 or tune")
        return self

    def species(self, path: str = "modes") -> tuple[crystal.IonSpecies, ...]:
        try:
            return crystal.chain(self.chain, self.mass_model)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}.chain", str(exc)) from None

    def qubits(self) -> list[int]:
        n = len(self.species())
        if self.tune is not None and self.tune.qubits is not None:
            return list(self.tune.qubits)
        return list(range(1, n - 1))


class SweepAxis(_Strict):
    field: str = Field(min_length=1)
    values: list[Union[float, str]] = Field(min_length=1)


class SweepSection(_Strict):
    base: Literal["scheme_a", "scheme_b"]
    axes: list[SweepAxis] = Field(min_length=1, max_length=2)

    @model_validator(mode="after")
    def _distinct(self):
        names = [a.field for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("sweep axes must name distinct fields")
        return self


class ScenarioConfig(_Strict):
    kind: Literal["scheme_a", "scheme_b", "modes", "sweep"]
    name: str = "scenario"
    scheme_a: Optional[SchemeASection] = None
    scheme_b: Optional[SchemeBSection] = None
    modes: Optional[ModesSection] = None
    sweep: Optional[SweepSection] = None

    @model_validator(mode="after")
    def _sections(self):
        need = self.sweep.base if self.kind == "sweep" and self.sweep is not None else self.kind
        if self.kind == "sweep" and self.sweep is None:
            raise ValueError("kind 'sweep' needs a 'sweep' section")
        if getattr(self, need) is None:
            raise ValueError(f"kind '{self.kind}' needs a '{need}' section")
        return self

    def section(self) -> BaseModel:
        return getattr(self, self.sweep.base if self.kind == "sweep" else self.kind)

    def section_name(self) -> str:
        return self.sweep.base if self.kind == "sweep" else self.kind


def _format(err: ValidationError) -> ConfigError:
    first = err.errors()[0]
    path = ".".join(str(p) for p in first["loc"])
    msg = first["msg"]
    if len(err.errors()) > 1:
        msg += f" (and {len(err.errors()) - 1} more)"
    return ConfigError(path, msg)


def parse_config(data: dict[str, Any]) -> ScenarioConfig:
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise _format(exc) from None
    validate_runtime(cfg)
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("", "the top level of a scenario file must be an object")
    return parse_config(data)


def dump_config(cfg: ScenarioConfig) -> str:
    return cfg.model_dump_json(indent=2, exclude_none=True)


def apply_overrides(cfg: ScenarioConfig, dt_ns: float | None = None, n_max: int | None = None) -> ScenarioConfig:
    """Copy of ``cfg`` with command-line --dt / --nmax pushed into the protocol section."""
    if cfg.kind == "modes" or (dt_ns is None and n_max is None):
        return cfg
    data = cfg.model_dump()
    sec = data[cfg.section_name()]
    if dt_ns is not None:
        sec["dt_ns"] = dt_ns
    if n_max is not None:
        sec["n_max"] = n_max
    return parse_config(data)


def validate_runtime(cfg: ScenarioConfig) -> None:
    """Build the library objects once so their invariants fail before any run."""
    if cfg.kind in ("scheme_a", "scheme_b"):
        cfg.section().to_config(cfg.kind)
        _label(cfg.section().initial, f"{cfg.kind}.initial")
    elif cfg.kind == "modes":
        m = cfg.modes
        m.species()
        if any(not 0 <= q < len(m.species()) for q in m.qubits()):
            raise ConfigError("modes.tune.qubits", "qubit index outside the chain")
    else:
        for point in grid_points(cfg):
            section_at(cfg, point).to_config(cfg.sweep.base)


def grid_points(cfg: ScenarioConfig) -> list[tuple]:
    """Grid points in lexicographic order of the axes (values sorted within each axis)."""
    axes = [sorted(a.values, key=lambda v: (isinstance(v, str), v)) for a in cfg.sweep.axes]
    return list(itertools.product(*axes))


def section_at(cfg: ScenarioConfig, point: tuple) -> BaseModel:
    """The base section with each sweep field set to the point's value."""
    base = cfg.sweep.base
    data = cfg.section().model_dump()
    for axis, value in zip(cfg.sweep.axes, point):
        node = data
        keys = axis.field.split(".")
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                raise ConfigError(f"sweep.axes.{axis.field}", f"'{k}' is not a nested section of {base}")
            node = node[k]
        if keys[-1] not in node:
            raise ConfigError(f"sweep.axes.{axis.field}", f"{base} has no field '{keys[-1]}'")
        node[keys[-1]] = value
    model = SchemeASection if base == "scheme_a" else SchemeBSection
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        err = _format(exc)
        raise ConfigError(f"{base}.{err.path}", err.message) from None
