"""Quadrotor model, allocation and inner loops."""

from .allocation import allocate_thrusts, control_allocation, mixer_matrix
from .inner import InnerOutput, NormalForm, channel_gains, inner_control, inner_control_step, normal_form_view
from .model import aero_forces, euler_zyx, net_wrench, rotation_from_euler, uav_derivative
from .params import InnerGains, UavParams, UavState

__all__ = [
    "InnerGains", "InnerOutput", "NormalForm", "UavParams", "UavState", "aero_forces",
    "allocate_thrusts", "channel_gains", "control_allocation", "euler_zyx", "inner_control",
    "inner_control_step", "mixer_matrix", "net_wrench", "normal_form_view", "rotation_from_euler",
    "uav_derivative",
]
