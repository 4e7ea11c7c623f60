"""Parasitic actuator dynamics ``1/(mu s + 1)^order`` in series with the plant input."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class UnmodelledSpec:
    order: int = 1
    mu: float = 0.0

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("unmodelled dynamics order must be 1 or 2")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")

    @property
    def n_states(self) -> int:
        return 0 if self.mu == 0.0 else self.order

    def output(self, x, u_cmd: float) -> float:
        return u_cmd if self.mu == 0.0 else x[-1]

    def deriv(self, x, u_cmd: float) -> list:
        if self.mu == 0.0:
            return []
        if self.order == 1:
            return [(u_cmd - x[0]) / self.mu]
        return [(u_cmd - x[0]) / self.mu, (x[0] - x[1]) / self.mu]

    def check_step(self, dt: float):
        if self.mu > 0.0 and dt > 0.5 * self.mu:
            warnings.warn(f"dt={dt} exceeds mu/2={self.mu / 2}; parasitic filter is poorly resolved",
                          RuntimeWarning, stacklevel=2)


def unmodelled_dynamics_filter(u_cmd, spec: UnmodelledSpec, dt: float) -> np.ndarray:
    """Filter a sampled command stream (zero initial state, RK4, input held per step)."""
    u = np.asarray(u_cmd, dtype=float)
    if spec.mu == 0.0:
        return u.copy()
    spec.check_step(dt)
    from .integrator import rk4_step

    x = [0.0] * spec.order
    out = np.empty_like(u)
    for k, uk in enumerate(u):
        out[k] = x[-1]
        x = rk4_step(lambda t, s: spec.deriv(s, uk), 0.0, x, dt)
    return out
