"""Behavioral transient simulator for a three-phase micro-generator AC-DC conditioning chain."""

from .boost import BoostMode, BoostParams, BoostState, UndefinedEfficiencyError, boost_efficiency, simulate_boost
from .control import ComparatorBank, GndcSequencer, Mode, PowerGood, ReferenceGenerator, StartupCircuit
from .engine import (CHANNELS, EngineConfig, MeasurementError, RunError, RunInfo, locate_event, run, simulate,
                     startup_duration)
from .generator import ThreePhaseSource, emf_potentials, line_to_line
from .power_stage import PowerStageState, RectifierNetwork, SwitchModel, step_network
from .report import RunSummary, SteadyStateWarning, efficiency_report, export_csv, read_csv
from .scenario import (KEYS, Scenario, ScenarioError, ScenarioParseError, ScenarioValidationError, load_scenario,
                       scenario_from_dict)
from .sweep import SweepRow, find_threshold, sweep, write_sweep_csv
from .topology import TOPOLOGIES, Topology, TopologyNotImplementedError
from .trace import Trace

__all__ = [
    "BoostMode", "BoostParams", "BoostState", "UndefinedEfficiencyError", "boost_efficiency", "simulate_boost",
    "ComparatorBank", "GndcSequencer", "Mode", "PowerGood", "ReferenceGenerator", "StartupCircuit",
    "CHANNELS", "EngineConfig", "MeasurementError", "RunError", "RunInfo", "locate_event", "run", "simulate",
    "startup_duration", "ThreePhaseSource", "emf_potentials", "line_to_line",
    "PowerStageState", "RectifierNetwork", "SwitchModel", "step_network",
    "RunSummary", "SteadyStateWarning", "efficiency_report", "export_csv", "read_csv",
    "KEYS", "Scenario", "ScenarioError", "ScenarioParseError", "ScenarioValidationError", "load_scenario",
    "scenario_from_dict", "SweepRow", "find_threshold", "sweep", "write_sweep_csv",
    "TOPOLOGIES", "Topology", "TopologyNotImplementedError", "Trace",
]
