"""Dynamic smooth sliding control: controllers, gain certification, quadrotor model and simulator."""

from .controller_zoo import StaController, StaParams, synthesized_equivalence_report
from .dssc import DsscController, DsscParams, dynamic_functions, modulation_function
from .gain_design import DesignFree, GainSet, certify, design_gains, q_positivity_check, small_gain_check
from .plant import DisturbanceSpec, IntegrationError, NominalControlSpec, PlantParams
from .sim import SimTrace, compute_metrics, detect_sliding, integrate

__version__ = "0.1.0"

__all__ = [
    "DesignFree", "DisturbanceSpec", "DsscController", "DsscParams", "GainSet", "IntegrationError",
    "NominalControlSpec", "PlantParams", "SimTrace", "StaController", "StaParams", "certify",
    "compute_metrics", "design_gains", "detect_sliding", "dynamic_functions", "integrate",
    "modulation_function", "q_positivity_check", "small_gain_check", "synthesized_equivalence_report",
]
