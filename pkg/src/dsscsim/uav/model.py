"""Rigid-body quadrotor dynamics with rotor thrust, drag torque and drag forces.

Vectors are plain float tuples in the hot path; the public helpers accept and
return numpy arrays. The flat state layout is ``p(3), v(3), R(9), Omega(3)``
with ``R`` row-major.
"""

from __future__ import annotations

import math

import numpy as np

from .params import UavParams, UavState

N_RIGID = 18


def cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def matvec(R, v):
    return (R[0] * v[0] + R[1] * v[1] + R[2] * v[2],
            R[3] * v[0] + R[4] * v[1] + R[5] * v[2],
            R[6] * v[0] + R[7] * v[1] + R[8] * v[2])


def matTvec(R, v):
    return (R[0] * v[0] + R[3] * v[1] + R[6] * v[2],
            R[1] * v[0] + R[4] * v[1] + R[7] * v[2],
            R[2] * v[0] + R[5] * v[1] + R[8] * v[2])


def euler_zyx(R):
    """Roll, pitch, yaw of a row-major rotation matrix."""
    s = max(-1.0, min(1.0, -R[6]))
    return math.atan2(R[7], R[8]), math.asin(s), math.atan2(R[3], R[0])


def rotation_from_euler(phi, theta, psi):
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return (cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf,
            sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf,
            -st, ct * sf, ct * cf)


def det3(R) -> float:
    a, b, c, d, e, f, g, h, i = R
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def orthonormality_error(R) -> float:
    A = np.asarray(R, dtype=float).reshape(3, 3)
    return float(np.max(np.abs(A.T @ A - np.eye(3))))


def reorthonormalize(R):
    """Gram-Schmidt on the columns, keeping the first column's direction."""
    A = np.asarray(R, dtype=float).reshape(3, 3)
    c0 = A[:, 0] / np.linalg.norm(A[:, 0])
    c1 = A[:, 1] - (c0 @ A[:, 1]) * c0
    c1 /= np.linalg.norm(c1)
    c2 = np.cross(c0, c1)
    return tuple(np.column_stack([c0, c1, c2]).reshape(-1).tolist())


def rotor_thrusts(spins, P: UavParams):
    return [P.k_T * w * w for w in spins]


def _aero(v, R, Om, spins, wind, P: UavParams):
    """Return ``(F_drag inertial, tau_drag body, F_di list, F_d)``."""
    vr = (v[0] - wind[0], v[1] - wind[1], v[2] - wind[2])
    nvr = math.sqrt(vr[0] * vr[0] + vr[1] * vr[1] + vr[2] * vr[2])
    vb = matTvec(R, vr)
    K = P.K_Fd
    Fd = matvec(R, (-K[0] * vb[0] * nvr, -K[1] * vb[1] * nvr, -K[2] * vb[2] * nvr))
    Fx, Fy, Fz = Fd
    tx = ty = tz = 0.0
    Kp = P.K_Fdi
    fdi = []
    for pb, w in zip(P.rotor_positions, spins):
        vi = matvec(R, cross(Om, pb))
        a = abs(w)
        F = (-Kp[0] * a * (vr[0] + vi[0]), -Kp[1] * a * (vr[1] + vi[1]), -Kp[2] * a * (vr[2] + vi[2]))
        fdi.append(F)
        Fx += F[0]
        Fy += F[1]
        Fz += F[2]
        t = cross(pb, matTvec(R, F))
        tx += t[0]
        ty += t[1]
        tz += t[2]
    return (Fx, Fy, Fz), (tx, ty, tz), fdi, Fd


def aero_forces(state: UavState, wind, P: UavParams):
    """Per-rotor thrust vectors and drag torques (body) and drag forces (inertial).

    Returns ``(T, tau_d, F_di, F_d)`` as arrays of shape (4,3), (4,3), (4,3), (3,).
    """
    spins = state.theta_dot
    f = rotor_thrusts(spins, P)
    T = np.array([[0.0, 0.0, fi] for fi in f])
    tau = np.array([[0.0, 0.0, s * P.c_tau * fi] for s, fi in zip(P.spin_dirs, f)])
    _, _, fdi, Fd = _aero(state.v, state.R, state.Omega, spins, tuple(wind), P)
    return T, tau, np.array(fdi), np.array(Fd)


def net_wrench(spins, P: UavParams):
    """``(f, M)``: total thrust and body moment produced by the rotors."""
    f = rotor_thrusts(spins, P)
    mx = my = mz = 0.0
    for pb, s, fi in zip(P.rotor_positions, P.spin_dirs, f):
        mx += pb[1] * fi
        my -= pb[0] * fi
        mz += s * P.c_tau * fi
    return sum(f), (mx, my, mz)


def rigid_derivative(x, spins, spin_ddot, wind, P: UavParams):
    """Derivative of the 18-entry rigid-body state for given (signed) spin rates."""
    v = x[3:6]
    R = x[6:15]
    Om = x[15:18]
    f, M = net_wrench(spins, P)
    Fdrag, tdrag, _, _ = _aero(v, R, Om, spins, wind, P)
    Mt = P.M_total
    acc = ((R[2] * f + Fdrag[0]) / Mt, (R[5] * f + Fdrag[1]) / Mt, (R[8] * f + Fdrag[2]) / Mt - P.g)
    J = P.J
    iz = P.I_i[2]
    ssum = sum(spins)
    tdist = (iz * Om[1] * ssum, -iz * Om[0] * ssum, iz * sum(spin_ddot))
    JO = (J[0] * Om[0], J[1] * Om[1], J[2] * Om[2])
    gyro = cross(Om, JO)
    om_dot = tuple((M[i] + tdrag[i] + tdist[i] - gyro[i]) / J[i] for i in range(3))
    # R_dot = R * hat(Omega)
    wx, wy, wz = Om
    Rd = []
    for r in range(3):
        a, b, c = R[3 * r], R[3 * r + 1], R[3 * r + 2]
        Rd.extend((b * wz - c * wy, c * wx - a * wz, a * wy - b * wx))
    return [v[0], v[1], v[2], acc[0], acc[1], acc[2], *Rd, *om_dot]


def uav_derivative(state: UavState, spins, wind, P: UavParams, spin_ddot=(0.0, 0.0, 0.0, 0.0)):
    """State derivative as ``(p_dot, v_dot, R_dot (3x3), Omega_dot)`` numpy arrays."""
    x = [*state.p, *state.v, *state.R, *state.Omega]
    if not all(math.isfinite(a) for a in x):
        from ..plant import IntegrationError

        raise IntegrationError("non-finite UAV state")
    d = rigid_derivative(x, tuple(spins), tuple(spin_ddot), tuple(wind), P)
    return np.array(d[0:3]), np.array(d[3:6]), np.array(d[6:15]).reshape(3, 3), np.array(d[15:18])
