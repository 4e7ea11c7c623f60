"""Simulation engine, scenarios and metrics."""

from .engine import Channel, NullController, UavSetup, simulate_abstract, simulate_uav
from .integrator import euler_step, heun_step, integrate_fixed, rk4_step
from .metrics import Metrics, compute_metrics, detect_sliding, total_variation_rate
from .scenario import CertificationError, ConfigError, ScenarioConfig, build, config_hash, integrate, validate
from .signals import CommandSchedule, Sine, Trajectory, example71_trajectories, trajectory_generator
from .trace import SimTrace
from .unmodelled import UnmodelledSpec, unmodelled_dynamics_filter

__all__ = [
    "CertificationError", "Channel", "CommandSchedule", "ConfigError", "Metrics", "NullController",
    "ScenarioConfig", "SimTrace", "Sine", "Trajectory", "UavSetup", "UnmodelledSpec", "build",
    "compute_metrics", "config_hash", "detect_sliding", "euler_step", "example71_trajectories",
    "heun_step", "integrate", "integrate_fixed", "rk4_step", "simulate_abstract", "simulate_uav",
    "total_variation_rate", "trajectory_generator", "unmodelled_dynamics_filter", "validate",
]
