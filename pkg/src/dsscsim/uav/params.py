"""Physical parameters of the quadrotor and gains of its inner loops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields


@dataclass(frozen=True)
class UavParams:
    """Quadrotor in X configuration; defaults describe a 10.9 kg airframe.

    Inertias and drag matrices are diagonal and stored as 3-tuples. Rotor ``i``
    sits at angle ``45 + 90 i`` degrees, radius ``arm`` in the body x-y plane.
    """

    n_r: int = 4
    spin_dirs: tuple = (1.0, -1.0, 1.0, -1.0)
    k_T: float = 0.0024
    c_tau: float = 0.57
    K_Fd: tuple = (0.03, 0.03, 0.015)
    K_Fdi: tuple = (8e-6, 8e-6, 8e-6)
    I_b: tuple = (0.4, 0.4, 0.74)
    I_i: tuple = (0.01, 0.01, 0.5e-5)
    m: float = 10.5
    m_bar: float = 0.1
    arm: float = 0.57
    prop_radius: float = 0.1
    g: float = 9.81
    spin_max: float = 300.0
    rotor_positions: tuple | None = None

    def __post_init__(self):
        if self.n_r != 4 or len(self.spin_dirs) != 4:
            raise ValueError("only the four-rotor X configuration is supported")
        for name in ("k_T", "c_tau", "m", "spin_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if min(self.K_Fd) < 0 or min(self.K_Fdi) < 0 or self.m_bar < 0:
            raise ValueError("aerodynamic coefficients and masses must be nonnegative")
        if self.rotor_positions is None:
            pos = tuple(
                (self.arm * math.cos(math.pi / 4 + i * math.pi / 2),
                 self.arm * math.sin(math.pi / 4 + i * math.pi / 2), 0.0)
                for i in range(self.n_r)
            )
            object.__setattr__(self, "rotor_positions", pos)

    @property
    def M_total(self) -> float:
        return self.m + self.n_r * self.m_bar

    @property
    def J(self) -> tuple:
        ixy, _, iz = self.I_i
        return (self.n_r * ixy + self.I_b[0], self.n_r * ixy + self.I_b[1], self.n_r * iz + self.I_b[2])

    @property
    def f_max(self) -> float:
        return self.k_T * self.spin_max ** 2

    @classmethod
    def from_dict(cls, d: dict | None) -> "UavParams":
        if not d:
            return cls()
        names = {f.name for f in fields(cls)}
        bad = set(d) - names
        if bad:
            raise KeyError(f"unknown uav parameter(s): {sorted(bad)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        if "rotor_positions" in kw and kw["rotor_positions"] is not None:
            kw["rotor_positions"] = tuple(tuple(p) for p in kw["rotor_positions"])
        return cls(**kw)


@dataclass(frozen=True)
class InnerGains:
    """Inner-loop gains, named as in the usual parameter table.

    For the velocity channels (x, y, z) and yaw rate, ``k_d`` acts on the
    velocity error and ``k_p`` on its integral. For roll and pitch, ``k_p``
    acts on the angle error and ``k_d`` on the body rate.
    """

    k_p_z: float = 0.0
    k_d_z: float = 1.0
    k_p_psi: float = 0.2
    k_d_psi: float = 1.0
    k_p_phi: float = 60.0
    k_d_phi: float = 15.0
    k_p_theta: float = 60.0
    k_d_theta: float = 15.0
    k_p_x: float = 0.0
    k_d_x: float = 1.0
    k_p_y: float = 0.0
    k_d_y: float = 1.0
    max_tilt: float = math.radians(35.0)
    k_h_min: float = 0.1
    gyro_compensation: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and v < 0:
                raise ValueError(f"inner gain {f.name} must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict | None) -> "InnerGains":
        if not d:
            return cls()
        names = {f.name for f in fields(cls)}
        bad = set(d) - names
        if bad:
            raise KeyError(f"unknown inner gain(s): {sorted(bad)}")
        return cls(**d)


@dataclass
class UavState:
    """Full state; ``R`` is row-major body-to-inertial, spins are signed."""

    p: tuple = (0.0, 0.0, 0.0)
    v: tuple = (0.0, 0.0, 0.0)
    R: tuple = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    Omega: tuple = (0.0, 0.0, 0.0)
    theta_dot: tuple = (0.0, 0.0, 0.0, 0.0)
    integrators: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
