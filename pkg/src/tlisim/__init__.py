"""Time-domain simulation of transformer-less single-phase PV inverters
(H4 unipolar/bipolar, H5, HERIC) with common-mode leakage and THD analysis."""

from .analysis import AnalysisReport, build_report, classify_levels, harmonic_spectrum, rms, thd, vde_compliance
from .analytic import cm_impedance, leakage_rms_estimate, leakage_spectrum
from .control import ControllerState, half_cycle_sign, hbcc_step, reference_current
from .params import CircuitParams, ParamsError, validate_params
from .report import ScenarioConfig, compare_all, export_waveforms, parse_config
from .simulate import SimState, SimulationError, WaveformRecord, cmv_dmv, run, step, vicm
from .topology import GateCommand, PoleVoltages, TopologyKind, enumerate_modes, pole_voltages, switch_frequency_class

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "build_report", "classify_levels", "harmonic_spectrum", "rms", "thd", "vde_compliance",
    "cm_impedance", "leakage_rms_estimate", "leakage_spectrum",
    "ControllerState", "half_cycle_sign", "hbcc_step", "reference_current",
    "CircuitParams", "ParamsError", "validate_params",
    "ScenarioConfig", "compare_all", "export_waveforms", "parse_config",
    "SimState", "SimulationError", "WaveformRecord", "cmv_dmv", "run", "step", "vicm",
    "GateCommand", "PoleVoltages", "TopologyKind", "enumerate_modes", "pole_voltages", "switch_frequency_class",
]
