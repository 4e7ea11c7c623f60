"""Fixed-step closed-loop simulation of abstract channels and of the full quadrotor.

Each step: evaluate every controller at the step start, sample and hold the
discontinuous parts (DSSC injection, STA sign term, schedule switches), record
the row, then advance all continuous states together with one integrator step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from ..plant import (DisturbanceSpec, IntegrationError, NominalControlSpec, PlantParams,
                     TrackingSignals, nominal_control)
from ..uav.allocation import control_allocation
from ..uav.inner import euler_rates, inner_control
from ..uav.model import N_RIGID, det3, euler_zyx, orthonormality_error, reorthonormalize, rigid_derivative
from ..uav.params import InnerGains, UavParams
from .integrator import get_scheme
from .signals import CommandSchedule, Trajectory
from .trace import SimTrace, TraceRecorder
from .unmodelled import UnmodelledSpec


class NullController:
    """Zero output; lets a channel run open loop on its command schedule."""

    kind = "none"
    state_names = ()
    n_states = 0
    uses_tau_m = False
    tau_m = None
    record_names = ()

    def initial_state(self, s):
        return []

    def stage(self, t, x, s):
        return 0.0

    def sample(self, t, x, s, u_n):
        return ()

    def deriv(self, t, x, s, held, u_n):
        return []

    def record(self, x, held):
        return ()

    def stats(self):
        return {}


@dataclass
class Channel:
    """One outer loop: reference, controller, nominal law and input path."""

    name: str
    controller: object
    l0: float = 1.0
    trajectory: Trajectory = field(default_factory=Trajectory)
    nominal: NominalControlSpec | None = None
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    unmodelled: UnmodelledSpec = field(default_factory=UnmodelledSpec)
    command: CommandSchedule = field(default_factory=CommandSchedule)
    plant: PlantParams | None = None
    y0: float = 0.0
    y_dot0: float = 0.0
    eta0: tuple = ()

    base_cols = ("y", "y_dot", "y_m", "y_m_dot", "e", "sigma", "u", "u_n", "u_cmd", "u_p", "d")

    def columns(self):
        return [f"{self.name}.{c}" for c in self.base_cols + tuple(self.controller.record_names)]


def _signals(y, yd, ref, l0):
    ym, ymd, ymdd = ref
    e = y - ym
    ed = yd - ymd
    return TrackingSignals(y, yd, ym, ymd, ymdd, e, ed, ed + l0 * e, yd + l0 * y, ymd + l0 * ym, ymdd + l0 * ymd)


class _Parts:
    """Evaluates one channel's controller and input path at a stage."""

    __slots__ = ("ch", "ctrl", "nom", "um", "um_n", "nc", "dist", "dist_zero", "l0", "traj")

    def __init__(self, ch: Channel):
        self.ch = ch
        self.ctrl = ch.controller
        self.nom = ch.nominal
        self.um = ch.unmodelled
        self.um_n = ch.unmodelled.n_states
        self.nc = ch.controller.n_states
        self.dist = ch.disturbance
        self.dist_zero = ch.disturbance.is_zero
        self.l0 = ch.l0
        self.traj = ch.trajectory.evaluate

    def control(self, t, y, yd, xc, xf, cmd):
        s = _signals(y, yd, self.traj(t), self.l0)
        ctrl = self.ctrl
        u = ctrl.stage(t, xc, s)
        un = 0.0 if self.nom is None else nominal_control(self.nom, s, ctrl.tau_m)
        ucmd = u + un + cmd
        up = ucmd if not self.um_n else xf[-1]
        return s, u, un, ucmd, up


def _check_finite(x, k):
    for v in x:
        if not math.isfinite(v):
            raise IntegrationError("non-finite state", step=k)


class AbstractLoop:
    """Single channel on the abstract plant ``y'' = -a_p y' - C eta + k_p (u_p + d)``."""

    def __init__(self, ch: Channel):
        if ch.plant is None:
            raise ValueError(f"channel {ch.name} needs plant parameters")
        self.ch = ch
        self.parts = _Parts(ch)
        p = ch.plant
        self.ne = p.n_eta
        self.A = p.A_eta.tolist()
        self.B = p.B_eta.tolist()
        self.C = p.C_eta.tolist()
        self.k_p, self.a_p = p.k_p, p.a_p
        self.held = ()
        self.t_hold = 0.0
        self.cmd = 0.0

    def initial(self):
        ch = self.ch
        eta = list(ch.eta0) if ch.eta0 else [0.0] * self.ne
        s = _signals(ch.y0, ch.y_dot0, ch.trajectory.evaluate(0.0), ch.l0)
        xc = ch.controller.initial_state(s)
        return eta + [ch.y0, ch.y_dot0] + list(xc) + [0.0] * self.parts.um_n

    def _split(self, x):
        ne, nc = self.ne, self.parts.nc
        return x[:ne], x[ne], x[ne + 1], x[ne + 2:ne + 2 + nc], x[ne + 2 + nc:]

    def _eval(self, t, x):
        eta, y, yd, xc, xf = self._split(x)
        P = self.parts
        s, u, un, ucmd, up = P.control(t, y, yd, xc, xf, self.cmd)
        d = 0.0 if P.dist_zero else P.dist.total(y, yd, s.sigma, t, self.t_hold)
        ceta = 0.0
        for c, v in zip(self.C, eta):
            ceta += c * v
        ydd = -self.a_p * yd - ceta + self.k_p * (up + d)
        return eta, yd, xc, xf, s, u, un, ucmd, up, d, ydd

    def deriv(self, t, x):
        return self._deriv(t, self._eval(t, x))

    def _deriv(self, t, ev):
        eta, yd, xc, xf, s, u, un, ucmd, up, d, ydd = ev
        out = [sum(a * v for a, v in zip(row, eta)) + b * yd for row, b in zip(self.A, self.B)] if self.ne else []
        out.append(yd)
        out.append(ydd)
        out.extend(self.parts.ctrl.deriv(t, xc, s, self.held, un))
        if self.parts.um_n:
            out.extend(self.parts.um.deriv(xf, ucmd))
        return out

    def columns(self):
        return self.ch.columns()

    def begin_step(self, t, x):
        self.t_hold = t
        self.cmd = self.ch.command.value(t)
        ev = self._eval(t, x)
        eta, yd, xc, xf, s, u, un, ucmd, up, d, ydd = ev
        self.held = self.parts.ctrl.sample(t, xc, s, un)
        self.k1 = self._deriv(t, ev)
        return (s.y, s.y_dot, s.y_m, s.y_m_dot, s.e, s.sigma, u, un, ucmd, up, d,
                *self.parts.ctrl.record(xc, self.held))


@dataclass
class UavSetup:
    params: UavParams = field(default_factory=UavParams)
    gains: InnerGains = field(default_factory=InnerGains)
    p0: tuple = (0.0, 0.0, 0.0)
    v0: tuple = (0.0, 0.0, 0.0)
    euler0: tuple = (0.0, 0.0, 0.0)
    Omega0: tuple = (0.0, 0.0, 0.0)
    wind: tuple = (0.0, 0.0, 0.0)
    wind_start: float = 0.0
    reortho_tol: float = 1e-8


UAV_CHANNELS = ("x", "y", "z", "psi")


class UavLoop:
    """Full quadrotor with inner loops; outer channels command ``(u_x, u_y, u_z, u_psi)``.

    Missing channels get a zero command. Outer outputs are the inertial
    positions with velocities, and the unwrapped yaw with its Euler rate.
    """

    def __init__(self, setup: UavSetup, channels: dict, dt: float):
        self.S = setup
        self.P = setup.params
        self.G = setup.gains
        self.dt = dt
        self.channels = [channels.get(n) for n in UAV_CHANNELS]
        self.parts = [None if c is None else _Parts(c) for c in self.channels]
        self.offsets = []
        off = N_RIGID + 4
        for p in self.parts:
            n = 0 if p is None else p.nc + p.um_n
            self.offsets.append((off, off + (0 if p is None else p.nc), off + n))
            off += n
        self.n = off
        self.held = [()] * 4
        self.cmds = [0.0] * 4
        self.t_hold = 0.0
        self.spin_prev = None
        self.spin_ddot = (0.0, 0.0, 0.0, 0.0)
        self.spins = (0.0, 0.0, 0.0, 0.0)
        self.psi_ref = setup.euler0[2]
        self.wind_now = (0.0, 0.0, 0.0)
        self.sat_count = 0
        self.kh_count = 0
        self.tilt_count = 0
        self.reortho_count = 0
        self.max_ortho_err = 0.0

    def initial(self):
        from ..uav.model import rotation_from_euler

        S = self.S
        x = [*S.p0, *S.v0, *rotation_from_euler(*S.euler0), *S.Omega0, 0.0, 0.0, 0.0, 0.0]
        outs = self._outputs(x)
        for p, (a, b, c), (y, yd) in zip(self.parts, self.offsets, outs):
            if p is None:
                continue
            s = _signals(y, yd, p.ch.trajectory.evaluate(0.0), p.l0)
            x.extend(p.ctrl.initial_state(s))
            x.extend([0.0] * p.um_n)
        return x

    def _outputs(self, x):
        phi, theta, psi = euler_zyx(x[6:15])
        psi += 2.0 * math.pi * round((self.psi_ref - psi) / (2.0 * math.pi))
        _, _, psid = euler_rates(phi, theta, x[15:18])
        return ((x[0], x[3]), (x[1], x[4]), (x[2], x[5]), (psi, psid))

    def _eval(self, t, x):
        outs = self._outputs(x)
        res = []
        ups = []
        for i, p in enumerate(self.parts):
            if p is None:
                res.append(None)
                ups.append(self.cmds[i])
                continue
            a, b, c = self.offsets[i]
            y, yd = outs[i]
            s, u, un, ucmd, up = p.control(t, y, yd, x[a:b], x[b:c], self.cmds[i])
            d = 0.0 if p.dist_zero else p.dist.total(y, yd, s.sigma, t, self.t_hold)
            res.append((s, u, un, ucmd, up, d))
            ups.append(up + d)
        inner = inner_control(x, x[N_RIGID:N_RIGID + 4], ups, self.G, self.P)
        spins, sat = control_allocation(inner.f, inner.M, self.P)
        return res, inner, spins, sat

    def deriv(self, t, x):
        return self._deriv(t, x, self._eval(t, x))

    def _deriv(self, t, x, ev):
        res, inner, spins, _ = ev
        out = rigid_derivative(x, spins, self.spin_ddot, self.wind_now, self.P)
        out.extend(inner.integrator_rates)
        for i, p in enumerate(self.parts):
            if p is None:
                continue
            a, b, c = self.offsets[i]
            s, u, un, ucmd, up, d = res[i]
            out.extend(p.ctrl.deriv(t, x[a:b], s, self.held[i], un))
            if p.um_n:
                out.extend(p.um.deriv(x[b:c], ucmd))
        return out

    def begin_step(self, t, x):
        self.t_hold = t
        S = self.S
        self.wind_now = S.wind if t >= S.wind_start - 1e-12 else (0.0, 0.0, 0.0)
        self.psi_ref = self._outputs(x)[3][0]
        for i, ch in enumerate(self.channels):
            self.cmds[i] = 0.0 if ch is None else ch.command.value(t)
        ev = self._eval(t, x)
        res, inner, spins, sat = ev
        if self.spin_prev is None:
            self.spin_ddot = (0.0, 0.0, 0.0, 0.0)
        else:
            self.spin_ddot = tuple((a - b) / self.dt for a, b in zip(spins, self.spin_prev))
        self.spin_prev = spins
        self.spins = spins
        self.sat_count += sat
        self.kh_count += inner.k_h_clamped
        self.tilt_count += inner.tilt_limited
        phi, theta, psi = euler_zyx(x[6:15])
        row = [*x[0:6], phi, theta, psi, *x[15:18], *spins, inner.f, *inner.M,
               inner.phi_d, inner.theta_d, float(sat), det3(x[6:15])]
        for i, p in enumerate(self.parts):
            if p is None:
                continue
            a, b, c = self.offsets[i]
            s, u, un, ucmd, up, d = res[i]
            self.held[i] = p.ctrl.sample(t, x[a:b], s, un)
            row.extend((s.y, s.y_dot, s.y_m, s.y_m_dot, s.e, s.sigma, u, un, ucmd, up, d))
            row.extend(p.ctrl.record(x[a:b], self.held[i]))
        self.k1 = self._deriv(t, x, ev)
        return row

    def after_step(self, x):
        R = x[6:15]
        err = orthonormality_error(R)
        self.max_ortho_err = max(self.max_ortho_err, err)
        if err > self.S.reortho_tol:
            x[6:15] = reorthonormalize(R)
            self.reortho_count += 1
        return x

    uav_cols = ("px", "py", "pz", "vx", "vy", "vz", "phi", "theta", "psi", "Ox", "Oy", "Oz",
                "spin1", "spin2", "spin3", "spin4", "f", "Mx", "My", "Mz", "phi_d", "theta_d", "sat", "det_R")

    def columns(self):
        cols = [f"uav.{c}" for c in self.uav_cols]
        for ch in self.channels:
            if ch is not None:
                cols.extend(ch.columns())
        return cols


def run_loop(loop, dt: float, n_steps: int, scheme: str = "rk4", record_every: int = 1,
             has_after: bool = False):
    """Drive ``loop`` for ``n_steps`` and return ``(columns dict, final state)``."""
    step, _ = get_scheme(scheme)
    x = loop.initial()
    rec = TraceRecorder(["t"] + loop.columns())
    f = loop.deriv
    for k in range(n_steps + 1):
        t = k * dt
        row = loop.begin_step(t, x)
        if k % record_every == 0:
            rec.append((t, *row))
        if k == n_steps:
            break
        x = step(f, t, x, dt, loop.k1)
        if has_after:
            x = loop.after_step(x)
        _check_finite(x, k + 1)
    return rec.finish(), x


def simulate_abstract(channels: list[Channel], dt: float, t_end: float, scheme: str = "rk4",
                      record_every: int = 1, meta: dict | None = None) -> SimTrace:
    """Run independent abstract channels on a shared grid."""
    n = int(round(t_end / dt))
    cols = {}
    stats = {}
    finals = {}
    t0 = time.perf_counter()
    for ch in channels:
        loop = AbstractLoop(ch)
        if hasattr(ch.controller, "dt"):
            ch.controller.dt = dt
        ch.unmodelled.check_step(dt)
        c, xf = run_loop(loop, dt, n, scheme, record_every)
        if "t" in cols:
            c.pop("t")
        cols.update(c)
        stats[ch.name] = ch.controller.stats()
        finals[ch.name] = xf
    m = dict(meta or {})
    m.update({"dt": dt, "t_end": n * dt, "integrator": scheme, "channels": [c.name for c in channels],
              "wall_time": time.perf_counter() - t0})
    return SimTrace(cols, m, {"controller_stats": stats, "final_state": finals})


def simulate_uav(setup: UavSetup, channels: dict, dt: float, t_end: float, scheme: str = "rk4",
                 record_every: int = 1, meta: dict | None = None) -> SimTrace:
    n = int(round(t_end / dt))
    for ch in channels.values():
        if hasattr(ch.controller, "dt"):
            ch.controller.dt = dt
        ch.unmodelled.check_step(dt)
    loop = UavLoop(setup, channels, dt)
    t0 = time.perf_counter()
    cols, xf = run_loop(loop, dt, n, scheme, record_every, has_after=True)
    m = dict(meta or {})
    m.update({"dt": dt, "t_end": n * dt, "integrator": scheme,
              "channels": [c for c in UAV_CHANNELS if c in channels],
              "wall_time": time.perf_counter() - t0})
    events = {
        "controller_stats": {k: c.controller.stats() for k, c in channels.items()},
        "saturation_steps": loop.sat_count,
        "k_h_clamp_steps": loop.kh_count,
        "tilt_limit_steps": loop.tilt_count,
        "reorthonormalizations": loop.reortho_count,
        "max_orthonormality_error": loop.max_ortho_err,
        "final_state": xf,
    }
    return SimTrace(cols, m, events)
