"""Dynamic smooth sliding controller.

Per channel the controller keeps three continuous states: the averaging filter
output ``u0_av``, the predictor ``sigma_hat`` and a norm-observer state
``eta_bar``. The discontinuous injection ``u0 = rho * sgn(sigma - sigma_hat)``
is sampled at step boundaries and held over the step; the dynamic functions
``k_o``, ``tau_av`` and ``tau_m`` are re-evaluated at every integrator stage.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .gain_design import GainSet
from .plant import DisturbanceSpec, PlantParams, TrackingSignals, sgn

SELECTORS = ("table1_vgsta", "example71_sqrt", "sta_delta_case1", "sta_delta_case2",
             "field_sqrt", "constant")


class StiffnessWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DsscParams:
    """Controller parameters.

    Which constants are used depends on ``selector``:

    * ``example71_sqrt``: ``k_o = kappa_o (|s|^.5 + delta)``, ``tau_m = kappa_m (|s|^.5 + delta)``,
      fixed ``tau_av``.
    * ``sta_delta_case1`` / ``sta_delta_case2``: ``k_o tau_av = 2 (|s|^.5 + delta) / kappa1`` and
      ``tau_m`` from ``kappa1``, ``kappa2``; fix exactly one of ``k_o`` and ``tau_av``.
    * ``table1_vgsta``: products from the certified gain set; fix one of ``k_o``, ``tau_av``.
    * ``field_sqrt``: ``tau_av = 2 |s|^.5 / (k_o kappa1) + delta``,
      ``tau_m = kappa1 |s|^.5 / (2 kappa2) + delta``, fixed ``k_o``.
    * ``constant``: fixed ``k_o``, ``tau_av``, ``tau_m``.

    ``rho_mode`` is ``"formula"`` (state-dependent modulation) or ``"constant"``.
    ``sigma_tilde0`` initializes the predictor so that ``sigma - sigma_hat`` starts
    at that value; by default ``sigma_hat(0) = 0``.
    """

    l0: float = 0.2
    delta: float = 1.0
    phi_a: float = 1.0
    phi_b: float = 0.0
    epsilon: float = 0.5
    delta_rho: float = 0.1
    selector: str = "example71_sqrt"
    kappa_o: float | None = None
    kappa_m: float | None = None
    kappa1: float | None = None
    kappa2: float | None = None
    k_o: float | None = None
    tau_av: float | None = None
    tau_m: float | None = None
    rho_mode: str = "formula"
    rho: float | None = None
    tau_min: float = 1e-4
    tau_max: float = 1e3
    lambda_eta: float = 1.0
    eta_gain: float = 0.0
    sigma_tilde0: float | None = None
    u0_av0: float = 0.0
    stiffness: str = "warn"

    def __post_init__(self):
        if self.l0 <= 0:
            raise ValueError("l0 must be positive")
        if self.delta <= 0 and self.selector != "constant":
            raise ValueError("delta must be positive")
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}; choose from {SELECTORS}")
        if not 0 < self.tau_min < self.tau_max:
            raise ValueError("need 0 < tau_min < tau_max")
        if self.rho_mode not in ("formula", "constant"):
            raise ValueError("rho_mode must be 'formula' or 'constant'")
        if self.rho_mode == "constant" and not (self.rho and self.rho > 0):
            raise ValueError("constant rho_mode needs rho > 0")
        if self.rho_mode == "formula" and self.delta_rho <= 0:
            raise ValueError("delta_rho must be positive")
        if self.lambda_eta < 0:
            raise ValueError("lambda_eta must be nonnegative")
        if self.stiffness not in ("warn", "error", "ignore"):
            raise ValueError("stiffness must be warn, error or ignore")
        need = {
            "example71_sqrt": ("kappa_o", "kappa_m", "tau_av"),
            "sta_delta_case1": ("kappa1", "kappa2"),
            "sta_delta_case2": ("kappa1", "kappa2"),
            "field_sqrt": ("kappa1", "kappa2", "k_o"),
            "constant": ("k_o", "tau_av", "tau_m"),
            "table1_vgsta": (),
        }[self.selector]
        for name in need:
            v = getattr(self, name)
            if v is None or not v > 0:
                raise ValueError(f"selector {self.selector} needs positive {name}")
        if self.selector in ("sta_delta_case1", "sta_delta_case2", "table1_vgsta"):
            if (self.k_o is None) == (self.tau_av is None):
                raise ValueError(f"selector {self.selector} needs exactly one of k_o, tau_av")


def _clamp(x, lo, hi):
    if x < lo:
        return lo, True
    if x > hi:
        return hi, True
    return x, False


def delta_log_factor(r: float, delta: float) -> float:
    """``1 - delta ln((r + delta)/delta) / r`` with its series near ``r = 0``."""
    q = r / delta
    if q < 1e-4:
        return q / 2.0 - q * q / 3.0 + q ** 3 / 4.0
    return 1.0 - math.log1p(q) / q


def eq35_phi(sigma: float, phi_a: float, phi_b: float, delta: float):
    """``(phi1_hat, phi1_hat_prime)`` of the regularized proportional shape."""
    r = math.sqrt(abs(sigma))
    rd = r + delta
    return (phi_a * sigma / rd + phi_b * sigma,
            phi_a * (r + 2.0 * delta) / (2.0 * rd * rd) + phi_b)


def _split(product, p: DsscParams):
    """Split ``k_o * tau_av = product`` keeping whichever one is fixed."""
    if p.k_o is not None:
        return p.k_o, product / p.k_o
    return product / p.tau_av, p.tau_av


def dynamic_functions_raw(sigma: float, e: float, p: DsscParams, g: GainSet | None = None):
    """Unclamped ``(k_o, tau_av, tau_m, phi1_hat, phi1_hat_prime)``."""
    if sigma != sigma or e != e:
        raise ValueError("NaN input to dynamic functions")
    r = math.sqrt(abs(sigma))
    d = p.delta
    sel = p.selector
    if sel == "example71_sqrt":
        ph, php = eq35_phi(sigma, p.phi_a, p.phi_b, d)
        return p.kappa_o * (r + d), p.tau_av, p.kappa_m * (r + d), ph, php
    if sel in ("sta_delta_case1", "sta_delta_case2"):
        k_o, tau_av = _split(2.0 * (r + d) / p.kappa1, p)
        fac = delta_log_factor(r, d)
        ph = fac * r * sgn(sigma)
        php = 1.0 / (2.0 * (r + d))
        if sel == "sta_delta_case2":
            tau_m = p.kappa1 / p.kappa2 * (r + d)
        elif r / d < 1e-4:
            q = r / d
            tau_m = p.kappa1 / p.kappa2 * 2.0 * d / (1.0 - 2.0 * q / 3.0)
        else:
            tau_m = p.kappa1 / p.kappa2 * r / fac
        return k_o, tau_av, tau_m, ph, php
    if sel == "field_sqrt":
        ph, php = eq35_phi(sigma, p.phi_a, p.phi_b, d)
        return (p.k_o, 2.0 * r / (p.k_o * p.kappa1) + d, p.kappa1 * r / (2.0 * p.kappa2) + d, ph, php)
    if sel == "constant":
        ph, php = eq35_phi(sigma, p.phi_a, p.phi_b, d) if d > 0 else (p.phi_b * sigma, p.phi_b)
        return p.k_o, p.tau_av, p.tau_m, ph, php
    # table1_vgsta
    if g is None:
        raise ValueError("table1_vgsta needs a GainSet")
    rd = r + g.delta
    ph = g.phi_a * sigma / rd + g.phi_b * sigma
    php = g.phi_a * (r + 2.0 * g.delta) / (2.0 * rd * rd) + g.phi_b
    kk = g.kappa_a * abs(sigma) + g.kappa_b * abs(e) + g.kappa_c
    k1 = kk * kk + g.kappa_d
    k1s = 2.0 * kk * g.kappa_a * sgn(sigma)
    k1e = 2.0 * kk * g.kappa_b * sgn(e)
    k2 = 2.0 * g.epsilon * k1 + g.gamma
    s_ = k1s * ph + k1 * php
    k_o, tau_av = _split(1.0 / s_, p)
    tau_m = s_ / ((g.phi_a / rd + g.phi_b) * (k1e * (-g.l0 * e + sigma) + k2 * php))
    return k_o, tau_av, tau_m, ph, php


def dynamic_functions_clamped(sigma, e, p: DsscParams, g: GainSet | None = None):
    """Dynamic functions with the time constants clamped; last item flags a clamp."""
    k_o, tau_av, tau_m, ph, php = dynamic_functions_raw(sigma, e, p, g)
    tau_av, c1 = _clamp(tau_av, p.tau_min, p.tau_max)
    if not tau_m > 0.0:
        tau_m, c2 = p.tau_max, True
    else:
        tau_m, c2 = _clamp(tau_m, p.tau_min, p.tau_max)
    return k_o, tau_av, tau_m, ph, php, c1 or c2


def dynamic_functions(sigma: float, e: float, t: float, params: DsscParams, gains: GainSet | None = None):
    """Return ``(k_o, tau_av, tau_m, phi1_hat, phi1_hat_prime)`` after clamping."""
    return dynamic_functions_clamped(sigma, e, params, gains)[:5]


def injection_u0(sigma_tilde: float, rho: float) -> float:
    return rho * sgn(sigma_tilde)


def disturbance_level(s: TrackingSignals, u_n: float, tau_m: float, eta_bar: float, l0: float,
                      k_p_upper: float, a_p_bound: float, alpha_d: float) -> float:
    """Norm bound ``D`` on the lumped disturbance seen by the predictor error."""
    return (k_p_upper * abs(u_n) + (a_p_bound + l0) * abs(s.y_dot) + k_p_upper * alpha_d
            + abs(s.sigma_m_dot) + abs(s.sigma) / tau_m + eta_bar)


def modulation_rho(k_o: float, u0_av: float, d_level: float, delta_rho: float, k_p_upper: float) -> float:
    return ((k_o + k_p_upper) * abs(u0_av) + d_level + delta_rho) / k_o


def modulation_function(u0_av, eta_bar, s: TrackingSignals, u_n, p: DsscParams, bounds: PlantParams,
                        k_o, tau_m, alpha_d=0.0) -> float:
    if p.rho_mode == "constant":
        return p.rho
    dl = disturbance_level(s, u_n, tau_m, eta_bar, p.l0, bounds.k_p_upper, bounds.a_p_bound, alpha_d)
    return modulation_rho(k_o, u0_av, dl, p.delta_rho, bounds.k_p_upper)


def averaging_filter_rate(u0_av: float, u0: float, tau_av: float) -> float:
    return (u0 - u0_av) / tau_av


def predictor_rate(sigma_hat: float, u0_av: float, u0: float, tau_m: float, k_o: float) -> float:
    return -sigma_hat / tau_m + k_o * (u0 - u0_av)


def norm_observer_rate(eta_bar: float, y_dot: float, lambda_eta: float, gain: float) -> float:
    return -lambda_eta * eta_bar + gain * abs(y_dot)


def norm_observer_gain_bound(plant: PlantParams, lambda_eta: float, horizon: float = 50.0,
                             n: int = 2001) -> float:
    """Smallest gain for which the observer dominates ``|C_eta eta|``.

    Uses ``|C e^{At} B| <= g e^{-lambda t}`` sampled on a time grid, so the
    filter driven by ``|y_dot|`` upper-bounds the zero-dynamics output modulo
    initial-condition transients.
    """
    if not plant.n_eta:
        return 0.0
    import numpy as np
    from scipy.linalg import expm

    if lambda_eta >= plant.eta_decay_rate:
        raise ValueError("lambda_eta must be below the zero-dynamics decay rate")
    ts = np.linspace(0.0, horizon, n)
    dt = ts[1] - ts[0]
    step = expm(plant.A_eta * dt)
    x = plant.B_eta.copy()
    best = 0.0
    for t in ts:
        best = max(best, abs(float(plant.C_eta @ x)) * math.exp(lambda_eta * t))
        x = step @ x
    return best


@dataclass
class DsscState:
    u0_av: float = 0.0
    sigma_hat: float = 0.0
    eta_bar: float = 0.0
    last_u0: float = 0.0


def _alpha_fn(alpha_d):
    if alpha_d is None:
        return lambda y, yd, s, t: 0.0
    if isinstance(alpha_d, DisturbanceSpec):
        return alpha_d.alpha_d
    if callable(alpha_d):
        return alpha_d
    c = float(alpha_d)
    return lambda y, yd, s, t: c


class DsscController:
    """DSSC channel in the engine's controller interface.

    ``alpha_d`` is the declared disturbance bound: a constant, a callable of
    ``(y, y_dot, sigma, t)`` or a :class:`DisturbanceSpec`.
    """

    kind = "dssc"
    state_names = ("u0_av", "sigma_hat", "eta_bar")
    n_states = 3
    uses_tau_m = True

    def __init__(self, params: DsscParams, bounds: PlantParams, gains: GainSet | None = None,
                 alpha_d=None, dt: float | None = None):
        self.p = params
        self.g = gains
        self.bounds = bounds
        self.alpha_d = _alpha_fn(alpha_d)
        self.dt = dt
        if params.selector == "table1_vgsta":
            if gains is None:
                raise ValueError("table1_vgsta needs a GainSet")
            if not gains.phi_b > gains.l0 / gains.epsilon:
                raise ValueError("gain set violates phi_b > l0/eps")
            if not gains.kappa_a > gains.kappa_b / gains.l0:
                raise ValueError("gain set violates kappa_a > kappa_b/l0")
        self.clamp_count = 0
        self.stiff_count = 0
        self._cache = None
        self.tau_m = 1.0

    def initial_state(self, s: TrackingSignals):
        sh = 0.0 if self.p.sigma_tilde0 is None else s.sigma - self.p.sigma_tilde0
        return [self.p.u0_av0, sh, 0.0]

    def stage(self, t, x, s: TrackingSignals) -> float:
        c = dynamic_functions_clamped(s.sigma, s.e, self.p, self.g)
        self._cache = c
        self.tau_m = c[2]
        return -x[0]

    def sample(self, t, x, s: TrackingSignals, u_n: float):
        k_o, tau_av, tau_m, ph, php, clamped = self._cache
        if clamped:
            self.clamp_count += 1
        if self.dt is not None and self.dt > 0.5 * tau_av and self.p.stiffness != "ignore":
            self.stiff_count += 1
            if self.p.stiffness == "error":
                raise ValueError(f"dt={self.dt} exceeds tau_av/2={tau_av / 2} at t={t}")
            if self.stiff_count == 1:
                warnings.warn(f"dt={self.dt} exceeds tau_av/2 at t={t:.4g}", StiffnessWarning,
                              stacklevel=2)
        if self.p.rho_mode == "constant":
            rho = self.p.rho
        else:
            ad = self.alpha_d(s.y, s.y_dot, s.sigma, t)
            dl = disturbance_level(s, u_n, tau_m, x[2], self.p.l0, self.bounds.k_p_upper,
                                   self.bounds.a_p_bound, ad)
            rho = modulation_rho(k_o, x[0], dl, self.p.delta_rho, self.bounds.k_p_upper)
        st = s.sigma - x[1]
        return (rho * sgn(st), rho, st, clamped)

    def deriv(self, t, x, s: TrackingSignals, held, u_n: float):
        k_o, tau_av, tau_m = self._cache[0], self._cache[1], self._cache[2]
        u0 = held[0]
        du = u0 - x[0]
        return [du / tau_av, -x[1] / tau_m + k_o * du,
                -self.p.lambda_eta * x[2] + self.p.eta_gain * abs(s.y_dot)]

    record_names = ("u0", "u0_av", "sigma_hat", "sigma_tilde", "rho", "k_o", "tau_av", "tau_m",
                    "phi1_hat", "clamp")

    def record(self, x, held):
        c = self._cache
        return (held[0], x[0], x[1], held[2], held[1], c[0], c[1], c[2], c[3], float(c[5]))

    def stats(self):
        return {"clamp_count": self.clamp_count, "stiffness_steps": self.stiff_count}
