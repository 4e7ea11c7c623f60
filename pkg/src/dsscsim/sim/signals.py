"""Reference trajectories and open-loop command schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Sine:
    amplitude: float
    omega: float
    phase: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """``y_m(t) = offset + sum_k A_k sin(w_k t + p_k)`` with analytic derivatives."""

    offset: float = 0.0
    terms: tuple[Sine, ...] = ()

    def evaluate(self, t: float):
        y, yd, ydd = self.offset, 0.0, 0.0
        for s in self.terms:
            a = s.omega * t + s.phase
            sa, ca = math.sin(a), math.cos(a)
            y += s.amplitude * sa
            yd += s.amplitude * s.omega * ca
            ydd -= s.amplitude * s.omega * s.omega * sa
        return y, yd, ydd

    def third_derivative(self, t: float) -> float:
        return -sum(s.amplitude * s.omega ** 3 * math.cos(s.omega * t + s.phase) for s in self.terms)

    @property
    def sup_bounds(self):
        """``(sup|y_m|, sup|y_m'|, sup|y_m''|)`` upper bounds."""
        return (abs(self.offset) + sum(abs(s.amplitude) for s in self.terms),
                sum(abs(s.amplitude * s.omega) for s in self.terms),
                sum(abs(s.amplitude) * s.omega ** 2 for s in self.terms))

    @property
    def is_constant(self) -> bool:
        return all(s.amplitude == 0.0 or s.omega == 0.0 for s in self.terms)

    @classmethod
    def from_config(cls, cfg) -> "Trajectory":
        if cfg is None:
            return cls()
        if isinstance(cfg, (int, float)):
            return cls(float(cfg))
        bad = set(cfg) - {"offset", "sines"}
        if bad:
            raise ValueError(f"unknown trajectory key {sorted(bad)[0]!r} (allowed: offset, sines)")
        terms = []
        for t in cfg.get("sines", []):
            extra = set(t) - {"amplitude", "omega", "period", "phase"}
            if extra:
                raise ValueError(f"unknown sine key {sorted(extra)[0]!r}")
            omega = t.get("omega")
            if omega is None:
                omega = 2.0 * math.pi / float(t["period"])
            terms.append(Sine(float(t.get("amplitude", 0.0)), float(omega), float(t.get("phase", 0.0))))
        return cls(float(cfg.get("offset", 0.0)), tuple(terms))


def trajectory_generator(spec):
    """Return a callable ``t -> (y_m, y_m_dot, y_m_ddot)``."""
    traj = spec if isinstance(spec, Trajectory) else Trajectory.from_config(spec)
    return traj.evaluate


def example71_trajectories():
    """Circle in x-y with slow vertical and yaw oscillations, keyed by channel."""
    w40 = 2.0 * math.pi / 40.0
    w60 = 2.0 * math.pi / 60.0
    return {
        "x": Trajectory(0.0, (Sine(20.0, w40),)),
        "y": Trajectory(0.0, (Sine(20.0, w40, math.pi / 2.0),)),
        "z": Trajectory(5.0, (Sine(3.0, w60),)),
        "psi": Trajectory(math.pi / 4.0, (Sine(-math.pi / 4.0, w40),)),
    }


@dataclass(frozen=True)
class CommandSchedule:
    """Piecewise-constant open-loop command: ``[(start, value), ...]``, held on the grid."""

    steps: tuple[tuple[float, float], ...] = ()

    def value(self, t_hold: float) -> float:
        v = 0.0
        for start, val in self.steps:
            if t_hold >= start - 1e-12:
                v = val
        return v

    @classmethod
    def from_config(cls, cfg):
        if not cfg:
            return cls()
        return cls(tuple((float(s["start"]), float(s["value"])) for s in cfg))
