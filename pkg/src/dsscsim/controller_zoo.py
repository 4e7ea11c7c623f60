"""Reference controllers the DSSC reduces to in sliding mode, and a comparison report.

All variants share the form ``u = -kappa1 phi1(sigma) - I`` with
``I' = kappa2 phi2(sigma)``; the PI variant uses ``phi1 = phi2 = sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dssc import delta_log_factor, eq35_phi
from .gain_design import GainSet, variable_gains
from .plant import TrackingSignals, sgn

VARIANTS = ("standard", "delta_case1", "delta_case2", "vgsta_approx", "pi")


def phi_functions(sigma: float, variant: str = "standard", delta: float = 0.0,
                  phi_a: float = 0.0, phi_b: float = 0.0):
    """Return ``(phi1, phi2)`` (or their regularized versions) at ``sigma``."""
    if sigma == 0.0:
        return 0.0, 0.0
    r = math.sqrt(abs(sigma))
    if variant == "standard":
        return r * sgn(sigma), 0.5 * sgn(sigma)
    if variant in ("delta_case1", "delta_case2"):
        if delta <= 0:
            raise ValueError("delta must be positive for the regularized variants")
        ph1 = delta_log_factor(r, delta) * r * sgn(sigma)
        if variant == "delta_case1":
            return ph1, ph1 / (2.0 * (r + delta))
        return ph1, sigma / (2.0 * (r + delta) ** 2)
    if variant == "vgsta_approx":
        if delta <= 0:
            raise ValueError("delta must be positive for the regularized variants")
        ph1, php = eq35_phi(sigma, phi_a, phi_b, delta)
        return ph1, ph1 * php
    if variant == "pi":
        return sigma, sigma
    raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class StaParams:
    """Parameters of a reference controller.

    ``integral0`` is the initial integral state or ``"zero_output"``, which
    picks the value making ``u(0) = 0``.
    """

    kappa1: float = 1.0
    kappa2: float = 1.0
    delta: float = 0.0
    variant: str = "standard"
    phi_a: float = 0.0
    phi_b: float = 0.0
    gains: GainSet | None = None
    g1: float | None = None
    g2: float | None = None
    integral0: float | str = 0.0
    l0: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "pi":
            if self.g1 is None or self.g2 is None or self.g1 < 0 or self.g2 < 0:
                raise ValueError("pi variant needs g1, g2 >= 0")
        elif self.variant == "vgsta_approx":
            if self.gains is None:
                raise ValueError("vgsta_approx needs a GainSet")
        elif not (self.kappa1 > 0 and self.kappa2 > 0):
            raise ValueError("kappa1, kappa2 must be positive")
        if self.variant in ("delta_case1", "delta_case2") and self.delta <= 0:
            raise ValueError("delta must be positive for the regularized variants")
        if isinstance(self.integral0, str) and self.integral0 != "zero_output":
            raise ValueError("integral0 must be a number or 'zero_output'")

    @classmethod
    def pi_from_dynamic(cls, k_o, tau_av, tau_m, **kw):
        """PI gains equivalent to constant dynamic functions."""
        return cls(variant="pi", g1=1.0 / (k_o * tau_av), g2=1.0 / (k_o * tau_av * tau_m), **kw)


@dataclass
class StaState:
    integral: float = 0.0
    t_start: float = 0.0


class StaController:
    """Reference controller in the engine's controller interface.

    The standard variant holds ``sgn(sigma)`` over each step, like the DSSC's
    injection; the other variants are continuous and evaluated per stage.
    """

    kind = "sta"
    state_names = ("integral",)
    n_states = 1
    uses_tau_m = False

    def __init__(self, params: StaParams):
        self.p = params
        self.tau_m = None
        self._k = (params.kappa1, params.kappa2)
        self._ph = (0.0, 0.0)

    def _gains(self, s: TrackingSignals):
        p = self.p
        if p.variant == "vgsta_approx":
            return variable_gains(s.sigma, s.e, p.gains)
        if p.variant == "pi":
            return p.g1, p.g2
        return p.kappa1, p.kappa2

    def _phis(self, sigma):
        p = self.p
        if p.variant == "vgsta_approx":
            g = p.gains
            return phi_functions(sigma, p.variant, g.delta, g.phi_a, g.phi_b)
        return phi_functions(sigma, p.variant, p.delta, p.phi_a, p.phi_b)

    def initial_state(self, s: TrackingSignals):
        if self.p.integral0 == "zero_output":
            k1, _ = self._gains(s)
            return [-k1 * self._phis(s.sigma)[0]]
        return [float(self.p.integral0)]

    def stage(self, t, x, s: TrackingSignals) -> float:
        self._k = self._gains(s)
        self._ph = self._phis(s.sigma)
        return -self._k[0] * self._ph[0] - x[0]

    def sample(self, t, x, s: TrackingSignals, u_n: float):
        return (0.5 * sgn(s.sigma),) if self.p.variant == "standard" else (None,)

    def deriv(self, t, x, s, held, u_n):
        ph2 = held[0] if held[0] is not None else self._ph[1]
        return [self._k[1] * ph2]

    record_names = ("integral", "kappa1", "kappa2")

    def record(self, x, held):
        return (x[0], self._k[0], self._k[1])

    def stats(self):
        return {}


def sta_control(state: StaState, sigma: float, params: StaParams, e: float = 0.0) -> float:
    """Instantaneous control ``u = -kappa1 phi1 - integral``."""
    if params.variant == "vgsta_approx":
        k1, _ = variable_gains(sigma, e, params.gains)
        g = params.gains
        ph1 = phi_functions(sigma, params.variant, g.delta, g.phi_a, g.phi_b)[0]
    elif params.variant == "pi":
        k1, ph1 = params.g1, sigma
    else:
        k1 = params.kappa1
        ph1 = phi_functions(sigma, params.variant, params.delta)[0]
    return -k1 * ph1 - state.integral


def sta_control_step(state: StaState, sigma: float, params: StaParams, dt: float,
                     e: float = 0.0) -> float:
    """Advance the integral one step for a frozen ``sigma`` and return the new control."""
    if params.variant == "vgsta_approx":
        _, k2 = variable_gains(sigma, e, params.gains)
        g = params.gains
        ph2 = phi_functions(sigma, params.variant, g.delta, g.phi_a, g.phi_b)[1]
    elif params.variant == "pi":
        k2, ph2 = params.g2, sigma
    else:
        k2 = params.kappa2
        ph2 = phi_functions(sigma, params.variant, params.delta)[1]
    state.integral += dt * k2 * ph2
    return sta_control(state, sigma, params, e)


@dataclass
class EquivalenceReport:
    t_s: float
    C_s: float
    sigma_sup: float
    sigma_rms: float
    u_sup: float
    u_rms: float
    n_samples: int

    def to_dict(self):
        return dict(self.__dict__)


def synthesized_equivalence_report(dssc_trace, sta_trace, channel: str, t_s: float | None = None,
                                   window: tuple[float, float] | None = None,
                                   g1_dssc: float | None = None, prop=None) -> EquivalenceReport:
    """Compare a DSSC run with a reference run after sliding onset.

    ``C_s`` is the offset between the two controls at ``t_s`` after removing
    the proportional parts: ``[u_d + g1 sigma_d] - [u_r + g1 sigma_r]``, with
    ``g1`` the DSSC's ``1/(k_o tau_av)`` at ``t_s`` unless given. ``prop`` may
    replace the linear term by the reference's proportional map, e.g.
    ``lambda s: kappa1 * phi1(s)``. Divergence is measured over ``window``
    (default ``[t_s, end]``).
    """
    ta = np.asarray(dssc_trace["t"])
    tb = np.asarray(sta_trace["t"])
    if ta.shape != tb.shape or np.max(np.abs(ta - tb)) > 1e-9:
        raise ValueError("traces are on different time grids")
    if t_s is None:
        t_s = dssc_trace.events.get("t_s", {}).get(channel)
        if t_s is None:
            raise ValueError(f"no sliding onset recorded for channel {channel!r}")
    sa, sb = dssc_trace[f"{channel}.sigma"], sta_trace[f"{channel}.sigma"]
    ua, ub = dssc_trace[f"{channel}.u"], sta_trace[f"{channel}.u"]
    i0 = int(np.searchsorted(ta, t_s - 1e-12))
    if g1_dssc is None:
        g1_dssc = 0.0
        if f"{channel}.k_o" in dssc_trace.columns:
            g1_dssc = 1.0 / (dssc_trace[f"{channel}.k_o"][i0] * dssc_trace[f"{channel}.tau_av"][i0])
    if prop is None:
        C_s = (ua[i0] + g1_dssc * sa[i0]) - (ub[i0] + g1_dssc * sb[i0])
    else:
        C_s = (ua[i0] + prop(sa[i0])) - (ub[i0] + prop(sb[i0]))
    lo, hi = window if window is not None else (t_s, ta[-1])
    m = (ta >= lo - 1e-12) & (ta <= hi + 1e-12) & (ta >= t_s - 1e-12)
    ds = np.abs(sa[m] - sb[m])
    du = np.abs(ua[m] - (ub[m] + C_s))
    n = int(m.sum())
    if n == 0:
        return EquivalenceReport(float(t_s), float(C_s), 0.0, 0.0, 0.0, 0.0, 0)
    return EquivalenceReport(float(t_s), float(C_s), float(ds.max()), float(np.sqrt(np.mean(ds ** 2))),
                             float(du.max()), float(np.sqrt(np.mean(du ** 2))), n)
