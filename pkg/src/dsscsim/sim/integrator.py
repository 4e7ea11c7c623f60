"""Fixed-step explicit integrators over flat float lists.

Plain lists beat small numpy arrays by a wide margin for the state sizes used
here (4 to 40 entries), which matters at 10^5 to 10^6 steps per run.
"""

from __future__ import annotations

from typing import Callable, Sequence

Deriv = Callable[[float, list], list]


def rk4_step(f: Deriv, t: float, x: Sequence[float], dt: float, k1=None) -> list:
    """Classical RK4; ``k1`` may be passed in when the caller already has ``f(t, x)``."""
    h2 = 0.5 * dt
    if k1 is None:
        k1 = f(t, x)
    k2 = f(t + h2, [a + h2 * b for a, b in zip(x, k1)])
    k3 = f(t + h2, [a + h2 * b for a, b in zip(x, k2)])
    k4 = f(t + dt, [a + dt * b for a, b in zip(x, k3)])
    h6 = dt / 6.0
    return [a + h6 * (b + 2.0 * (c + d) + e) for a, b, c, d, e in zip(x, k1, k2, k3, k4)]


def euler_step(f: Deriv, t: float, x: Sequence[float], dt: float, k1=None) -> list:
    return [a + dt * b for a, b in zip(x, f(t, x) if k1 is None else k1)]


def heun_step(f: Deriv, t: float, x: Sequence[float], dt: float, k1=None) -> list:
    if k1 is None:
        k1 = f(t, x)
    k2 = f(t + dt, [a + dt * b for a, b in zip(x, k1)])
    h2 = 0.5 * dt
    return [a + h2 * (b + c) for a, b, c in zip(x, k1, k2)]


SCHEMES = {"rk4": (rk4_step, 4), "heun": (heun_step, 2), "euler": (euler_step, 1)}


def get_scheme(name: str):
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown integrator {name!r}; choose from {sorted(SCHEMES)}") from None


def integrate_fixed(f: Deriv, x0: Sequence[float], dt: float, n_steps: int,
                    t0: float = 0.0, scheme: str = "rk4") -> list:
    """Integrate and return the list of states on the grid (length ``n_steps + 1``)."""
    step, _ = get_scheme(scheme)
    xs = [list(x0)]
    x = list(x0)
    for k in range(n_steps):
        x = step(f, t0 + k * dt, x, dt)
        xs.append(x)
    return xs
