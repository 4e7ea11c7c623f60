"""Inner velocity/attitude loops turning velocity commands into thrust and moments.

Channel ``z``: feedback linearization plus PI on the vertical velocity error.
Channels ``x``, ``y``: PI on the horizontal velocity errors gives a desired
acceleration, which is turned into roll/pitch set-points tracked by a PD loop
on the body rates. Yaw: PI on the yaw-rate error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import cross, euler_zyx
from .params import InnerGains, UavParams


@dataclass
class InnerOutput:
    f: float
    M: tuple
    integrator_rates: list
    phi_d: float
    theta_d: float
    k_h_clamped: bool
    tilt_limited: bool


def euler_rates(phi, theta, Om):
    """``(phi_dot, theta_dot, psi_dot)`` from body rates (ZYX convention)."""
    sf, cf = math.sin(phi), math.cos(phi)
    ct = math.cos(theta)
    tt = math.tan(theta)
    return (Om[0] + (sf * Om[1] + cf * Om[2]) * tt,
            cf * Om[1] - sf * Om[2],
            (sf * Om[1] + cf * Om[2]) / ct)


def inner_control(x, integ, cmd, G: InnerGains, P: UavParams) -> InnerOutput:
    """Thrust and body moment for commands ``cmd = (u_x, u_y, u_z, u_psi)``.

    ``x`` is the 18-entry rigid state, ``integ`` the four integrators
    ``(int e_vx, int e_vy, int e_vz, int e_psi_dot)``.
    """
    v = x[3:6]
    R = x[6:15]
    Om = x[15:18]
    phi, theta, psi = euler_zyx(R)
    ex, ey, ez = v[0] - cmd[0], v[1] - cmd[1], v[2] - cmd[2]
    g = P.g
    uz = -G.k_d_z * ez - G.k_p_z * integ[2]
    k_h = math.cos(phi) * math.cos(theta)
    clamped = k_h < G.k_h_min
    if clamped:
        k_h = G.k_h_min
    f = max(0.0, (uz + g) * P.M_total / k_h)
    ax = -G.k_d_x * ex - G.k_p_x * integ[0]
    ay = -G.k_d_y * ey - G.k_p_y * integ[1]
    gz = max(g + uz, 0.1 * g)
    sp, cp = math.sin(psi), math.cos(psi)
    theta_d = math.atan((ax * cp + ay * sp) / gz)
    phi_d = math.atan(math.cos(theta_d) * (ax * sp - ay * cp) / gz)
    lim = G.max_tilt
    limited = abs(theta_d) > lim or abs(phi_d) > lim
    theta_d = max(-lim, min(lim, theta_d))
    phi_d = max(-lim, min(lim, phi_d))
    _, _, psi_dot = euler_rates(phi, theta, Om)
    epsi = psi_dot - cmd[3]
    upsi = -G.k_d_psi * epsi - G.k_p_psi * integ[3]
    J = P.J
    M = [J[0] * (-G.k_p_phi * (phi - phi_d) - G.k_d_phi * Om[0]),
         J[1] * (-G.k_p_theta * (theta - theta_d) - G.k_d_theta * Om[1]),
         J[2] * upsi]
    if G.gyro_compensation:
        gy = cross(Om, (J[0] * Om[0], J[1] * Om[1], J[2] * Om[2]))
        M = [M[0] + gy[0], M[1] + gy[1], M[2] + gy[2]]
    return InnerOutput(f, tuple(M), [ex, ey, ez, epsi], phi_d, theta_d, clamped, limited)


def inner_control_step(state, commands, gains: InnerGains, dt: float, P: UavParams | None = None):
    """Evaluate the inner loops on a :class:`UavState` and advance its integrators by ``dt``.

    Returns ``(f, M_net)``; the state's integrators are updated in place (Euler).
    """
    P = P or UavParams()
    x = [*state.p, *state.v, *state.R, *state.Omega]
    out = inner_control(x, state.integrators, commands, gains, P)
    state.integrators = [a + dt * b for a, b in zip(state.integrators, out.integrator_rates)]
    return out.f, out.M


@dataclass(frozen=True)
class NormalForm:
    A_eta: float | None
    B_eta: float | None
    C_eta: float | None
    k_p: float
    a_p: float
    first_order: bool


def normal_form_view(k_p: float, k_i: float) -> NormalForm:
    """Reduced model of a velocity channel with closed-loop gains ``k_p`` (P) and ``k_i`` (I).

    With ``k_i = 0`` the channel is the first-order lag ``v' = -k_p v + k_p (u + d)``.
    """
    if k_p <= 0.0:
        raise ValueError("the channel needs a positive proportional gain for a relative-degree-one model")
    if k_i < 0.0:
        raise ValueError("k_i must be nonnegative")
    if k_i == 0.0:
        return NormalForm(None, None, None, k_p, k_p, True)
    return NormalForm(-k_i / k_p, 1.0, k_i ** 2 / k_p ** 2, k_p, (k_p ** 2 - k_i) / k_p, False)


def channel_gains(G: InnerGains):
    """Closed-loop ``(k_p, k_i)`` of each commanded channel."""
    return {"x": (G.k_d_x, G.k_p_x), "y": (G.k_d_y, G.k_p_y),
            "z": (G.k_d_z, G.k_p_z), "psi": (G.k_d_psi, G.k_p_psi)}
