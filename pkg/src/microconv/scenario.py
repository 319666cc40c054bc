"""Scenario description and its YAML file format.

A scenario file is a YAML mapping of sections to keys; every key is also
addressable by its dotted name (``source.v_ll_peak``), which is what sweeps
use. Missing keys take their defaults; unknown keys are rejected.

==========================  ==========  ===============================================
key                         default     meaning (SI units)
==========================  ==========  ===============================================
source.v_ll_peak            3.3         peak line-to-line EMF amplitude, V
source.freq                 50e3        electrical frequency, Hz
source.r_phase              1.0         phase resistance, ohm
source.l_phase              1e-6        phase inductance, H
source.phase0               0.0         initial electrical angle, rad
rectifier.r_on              1.0         switch on-resistance, ohm
rectifier.r_off             10e6        switch off-resistance, ohm
rectifier.v_th              0.5         switch threshold voltage, V
rectifier.body_vf           0.6         body-diode forward drop, V
rectifier.body_rd           10.0        body-diode series resistance, ohm
rectifier.r_on_startup      50.0        channel resistance under start-up drive, ohm
rectifier.c_vdda            10e-9       on-chip rail capacitance, F
rectifier.c_out             1e-6        output (middle) capacitor, F
control.v_supply_min        1.0         comparator supply minimum, V
control.hysteresis          5e-3        comparator hysteresis, V
control.prop_delay          100e-9      comparator propagation delay, s
control.v_th_m4             0.5         M4 threshold of the start-up circuit, V
control.u12_min             1.0         minimum U12 for start-up drive, V
control.c1                  100e-12     start-up capacitor C1, F
control.r_leak              100e6       leakage resistance of the C1 node, ohm
control.i_charge            2e-6        M7 charge current, A
control.i_ref_target        2e-6        bias reference current, A
control.tau_establish       2e-6        reference settling time constant, s
control.established_fraction 0.9        fraction of target that counts as established
control.gndc_ramp_duration  200e-6      gndc conductance ramp time, s
control.gndc_g_max          10.0        final gndc conductance, S
control.power_good_on       2.0         v_dda that releases the boost shutdown, V
control.power_good_off      1.3         v_dda that shuts the boost down again, V
boost.l_boost               22e-6       boost inductance, H
boost.c_out                 47e-6       boost output capacitor, F
boost.f_sw                  500e3       switching frequency, Hz
boost.v_out_set             5.0         regulated output, V (2 to 5.5)
boost.v_in_min              0.8         undervoltage lockout, V
boost.i_quiescent           16e-6       quiescent current, A
boost.r_switch              0.3         switch resistance, ohm
boost.r_diode_eq            0.4         diode-path resistance, ohm
boost.v_band                null        PFM band, V (null: 1 % of v_out_set)
boost.i_peak_max            1.0         inductor peak-current clamp, A
boost.d_max                 0.9         maximum duty
boost.e_switching           60e-9       energy lost per switching cycle, J
load.r_load                 24.0        load resistance, ohm (.inf: no load); sits on
                                        the boost output when the boost is enabled
engine.dt                   10e-9       step, s
engine.t_end                1e-3        simulated time, s
engine.event_tol            1e-9        event localization tolerance, s
engine.record_decimation    10          one trace sample per k*dt
features.startup_circuit_enabled  true
features.gndc_sequencer_enabled   true
features.boost_enabled      null        null: follows topology_tag
features.topology_tag       FULL_WAVE   FULL_WAVE | DUAL_STAGE | QUASI_SINGLE | SINGLE_STAGE
==========================  ==========  ===============================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .boost import BoostParams
from .control import ComparatorBank, GndcSequencer, PowerGood, ReferenceGenerator, StartupCircuit
from .engine import EngineConfig
from .generator import ThreePhaseSource
from .power_stage import SwitchModel
from .topology import Topology


class ScenarioError(ValueError):
    """Configuration problem (parse or validation)."""


class ScenarioParseError(ScenarioError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ScenarioValidationError(ScenarioError):
    pass


@dataclass(frozen=True)
class Scenario:
    source: ThreePhaseSource = field(default_factory=ThreePhaseSource)
    switch: SwitchModel = field(default_factory=SwitchModel)
    c_vdda: float = 10e-9
    c_out: float = 1e-6
    comparator: ComparatorBank = field(default_factory=ComparatorBank)
    startup: StartupCircuit = field(default_factory=StartupCircuit)
    reference: ReferenceGenerator = field(default_factory=ReferenceGenerator)
    gndc: GndcSequencer = field(default_factory=GndcSequencer)
    power_good: PowerGood = field(default_factory=PowerGood)
    boost: BoostParams = field(default_factory=BoostParams)
    r_load: float = 24.0
    engine: EngineConfig = field(default_factory=EngineConfig)
    startup_circuit_enabled: bool = True
    gndc_sequencer_enabled: bool = True
    boost_enabled: bool = False
    topology_tag: Topology = Topology.FULL_WAVE

    def __post_init__(self):
        if not self.r_load > 0:
            raise ValueError(f"r_load must be > 0 (got {self.r_load})")
        if not self.c_vdda > 0 or not self.c_out > 0:
            raise ValueError("c_vdda and c_out must be > 0")
        object.__setattr__(self, "topology_tag", Topology(self.topology_tag))
        if self.topology_tag in (Topology.FULL_WAVE, Topology.DUAL_STAGE):
            if self.boost_enabled != (self.topology_tag is Topology.DUAL_STAGE):
                raise ValueError("boost_enabled must be true exactly when topology_tag is DUAL_STAGE")

    def to_flat(self) -> dict:
        return to_flat(self)

    def with_value(self, key: str, value) -> "Scenario":
        flat = self.to_flat()
        if key not in flat:
            raise ScenarioValidationError(f"unknown key {key!r}")
        flat[key] = value
        return from_flat(flat)


# (dotted key, owning object, attribute)
_SPEC = (
    ("source.v_ll_peak", "source", "v_ll_peak"),
    ("source.freq", "source", "freq"),
    ("source.r_phase", "source", "r_phase"),
    ("source.l_phase", "source", "l_phase"),
    ("source.phase0", "source", "phase0"),
    ("rectifier.r_on", "switch", "r_on"),
    ("rectifier.r_off", "switch", "r_off"),
    ("rectifier.v_th", "switch", "v_th"),
    ("rectifier.body_vf", "switch", "body_vf"),
    ("rectifier.body_rd", "switch", "body_rd"),
    ("rectifier.r_on_startup", "switch", "r_on_startup"),
    ("rectifier.c_vdda", None, "c_vdda"),
    ("rectifier.c_out", None, "c_out"),
    ("control.v_supply_min", "comparator", "v_supply_min"),
    ("control.hysteresis", "comparator", "hysteresis"),
    ("control.prop_delay", "comparator", "prop_delay"),
    ("control.v_th_m4", "startup", "v_th_m4"),
    ("control.u12_min", "startup", "u12_min"),
    ("control.c1", "startup", "c1"),
    ("control.r_leak", "startup", "r_leak"),
    ("control.i_charge", "startup", "i_charge"),
    ("control.i_ref_target", "reference", "i_ref_target"),
    ("control.tau_establish", "reference", "tau_establish"),
    ("control.established_fraction", "reference", "established_fraction"),
    ("control.gndc_ramp_duration", "gndc", "ramp_duration"),
    ("control.gndc_g_max", "gndc", "g_max"),
    ("control.power_good_on", "power_good", "v_on"),
    ("control.power_good_off", "power_good", "v_off"),
    ("boost.l_boost", "boost", "l_boost"),
    ("boost.c_out", "boost", "c_out"),
    ("boost.f_sw", "boost", "f_sw"),
    ("boost.v_out_set", "boost", "v_out_set"),
    ("boost.v_in_min", "boost", "v_in_min"),
    ("boost.i_quiescent", "boost", "i_quiescent"),
    ("boost.r_switch", "boost", "r_switch"),
    ("boost.r_diode_eq", "boost", "r_diode_eq"),
    ("boost.v_band", "boost", "v_band"),
    ("boost.i_peak_max", "boost", "i_peak_max"),
    ("boost.d_max", "boost", "d_max"),
    ("boost.e_switching", "boost", "e_switching"),
    ("load.r_load", None, "r_load"),
    ("engine.dt", "engine", "dt"),
    ("engine.t_end", "engine", "t_end"),
    ("engine.event_tol", "engine", "event_tol"),
    ("engine.record_decimation", "engine", "record_decimation"),
    ("features.startup_circuit_enabled", None, "startup_circuit_enabled"),
    ("features.gndc_sequencer_enabled", None, "gndc_sequencer_enabled"),
    ("features.boost_enabled", None, "boost_enabled"),
    ("features.topology_tag", None, "topology_tag"),
)
KEYS = tuple(k for k, _, _ in _SPEC)
_BOOL_KEYS = {"features.startup_circuit_enabled", "features.gndc_sequencer_enabled", "features.boost_enabled"}
_INT_KEYS = {"engine.record_decimation"}
_NULLABLE = {"boost.v_band", "features.boost_enabled"}
_OWNERS = {"source": ThreePhaseSource, "switch": SwitchModel, "comparator": ComparatorBank,
           "startup": StartupCircuit, "reference": ReferenceGenerator, "gndc": GndcSequencer,
           "power_good": PowerGood,
           "boost": BoostParams, "engine": EngineConfig}


def to_flat(s: Scenario) -> dict:
    flat = {}
    for key, owner, attr in _SPEC:
        obj = s if owner is None else getattr(s, owner)
        v = getattr(obj, attr)
        flat[key] = v.value if isinstance(v, Topology) else v
    return flat


def _coerce(key, value):
    if value is None:
        if key in _NULLABLE:
            return None
        raise ScenarioValidationError(f"{key} must not be null")
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ScenarioValidationError(f"{key} must be true or false")
        return value
    if key == "features.topology_tag":
        try:
            return Topology(str(value))
        except ValueError:
            names = ", ".join(t.value for t in Topology)
            raise ScenarioValidationError(f"{key} must be one of {names}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ScenarioValidationError(f"{key} must be a number")
    try:
        num = float(value)
    except ValueError:
        raise ScenarioValidationError(f"{key} must be a number, got {value!r}") from None
    if math.isnan(num):
        raise ScenarioValidationError(f"{key} must not be NaN")
    if key in _INT_KEYS:
        if num != int(num):
            raise ScenarioValidationError(f"{key} must be an integer")
        return int(num)
    return num


def from_flat(flat: dict) -> Scenario:
    """Build a validated Scenario from dotted keys (missing keys keep defaults)."""
    unknown = sorted(set(flat) - set(KEYS))
    if unknown:
        raise ScenarioValidationError(f"unknown key(s): {', '.join(unknown)}")
    values = {k: _coerce(k, v) for k, v in flat.items()}
    topo = values.get("features.topology_tag", Topology.FULL_WAVE)
    if values.get("features.boost_enabled") is None:
        values["features.boost_enabled"] = topo is Topology.DUAL_STAGE
    groups: dict[str, dict[str, Any]] = {name: {} for name in _OWNERS}
    top: dict[str, Any] = {}
    for key, owner, attr in _SPEC:
        if key not in values:
            continue
        (top if owner is None else groups[owner])[attr] = values[key]
    try:
        for name, cls in _OWNERS.items():
            top[name] = cls(**groups[name])
        return Scenario(**top)
    except (ValueError, TypeError) as exc:
        raise ScenarioValidationError(str(exc)) from None


def scenario_from_dict(tree) -> Scenario:
    """Build a Scenario from a nested ``{section: {key: value}}`` mapping."""
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ScenarioValidationError("scenario must be a mapping of sections")
    flat = {}
    for section, body in tree.items():
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ScenarioValidationError(f"section {section!r} must be a mapping")
        for k, v in body.items():
            flat[f"{section}.{k}"] = v
    return from_flat(flat)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    try:
        tree = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ScenarioParseError(f"{path}:{line}:{col}: {exc.problem or exc}", line, col) from None
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    return scenario_from_dict(tree)


def dump_scenario(s: Scenario) -> str:
    tree: dict[str, dict] = {}
    for key, v in to_flat(s).items():
        section, name = key.split(".", 1)
        tree.setdefault(section, {})[name] = v
    return yaml.safe_dump(tree, sort_keys=False)
