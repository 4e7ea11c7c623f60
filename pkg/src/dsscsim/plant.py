"""Uncertain relative-degree-one plant class, disturbances and tracking signals.

The plant has output ``y`` with relative degree two from the control to ``y``
(one from the control to ``sigma = e_dot + l0 e``) and optional stable zero
dynamics ``eta`` of order ``n - 2``::

    eta_dot = A_eta eta + B_eta y_dot
    y_ddot  = -a_p y_dot - C_eta eta + k_p (u_p + d)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class IntegrationError(RuntimeError):
    """Raised when a simulated state becomes non-finite."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


def sgn(x: float) -> float:
    """Sign with ``sgn(0) = 0``."""
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


def _as_matrix(a, n):
    arr = np.zeros((n, n)) if a is None else np.atleast_2d(np.asarray(a, dtype=float))
    if arr.shape != (n, n):
        raise ValueError(f"A_eta must be {n}x{n}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class PlantParams:
    """True plant parameters plus the bounds available to the designer.

    ``A_eta``/``B_eta``/``C_eta`` may be omitted for the second-order case. The
    disturbance bound constants ``k_d1..k_d5`` belong to :class:`DisturbanceSpec`,
    which can fill them from its components.
    """

    k_p: float = 1.0
    a_p: float = 1.0
    A_eta: np.ndarray | None = None
    B_eta: np.ndarray | None = None
    C_eta: np.ndarray | None = None
    k_p_lower: float | None = None
    k_p_upper: float | None = None
    a_p_bound: float | None = None

    def __post_init__(self):
        if self.k_p_lower is None:
            object.__setattr__(self, "k_p_lower", self.k_p)
        if self.k_p_upper is None:
            object.__setattr__(self, "k_p_upper", self.k_p)
        if self.a_p_bound is None:
            object.__setattr__(self, "a_p_bound", abs(self.a_p))
        if not (0.0 < self.k_p_lower <= self.k_p <= self.k_p_upper):
            raise ValueError(
                f"need 0 < k_p_lower <= k_p <= k_p_upper, got "
                f"{self.k_p_lower}, {self.k_p}, {self.k_p_upper}"
            )
        if abs(self.a_p) > self.a_p_bound + 1e-15:
            raise ValueError(f"|a_p|={abs(self.a_p)} exceeds a_p_bound={self.a_p_bound}")
        nz = 0 if self.B_eta is None else int(np.size(self.B_eta))
        object.__setattr__(self, "A_eta", _as_matrix(self.A_eta, nz))
        for name in ("B_eta", "C_eta"):
            v = getattr(self, name)
            v = np.zeros(nz) if v is None else np.asarray(v, dtype=float).reshape(-1)
            if v.shape != (nz,):
                raise ValueError(f"{name} must have length {nz}")
            object.__setattr__(self, name, v)
        if nz:
            eig = np.linalg.eigvals(self.A_eta)
            if not np.all(eig.real < 0.0):
                raise ValueError(f"A_eta is not Hurwitz, eigenvalues {eig}")

    @property
    def n_eta(self) -> int:
        return int(self.B_eta.shape[0])

    @property
    def order(self) -> int:
        return self.n_eta + 2

    @property
    def eta_decay_rate(self) -> float:
        """Slowest decay rate of the zero dynamics (inf when there are none)."""
        if not self.n_eta:
            return math.inf
        return float(-np.max(np.linalg.eigvals(self.A_eta).real))

    @property
    def norm_CB(self) -> float:
        return float(abs(self.C_eta @ self.B_eta)) if self.n_eta else 0.0

    @property
    def norm_CA(self) -> float:
        return float(np.linalg.norm(self.C_eta @ self.A_eta)) if self.n_eta else 0.0


@dataclass
class PlantState:
    eta: np.ndarray
    y: float
    y_dot: float

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float).reshape(-1)
        if not (math.isfinite(self.y) and math.isfinite(self.y_dot)) or not np.all(
            np.isfinite(self.eta)
        ):
            raise IntegrationError("non-finite plant state")


@dataclass(frozen=True)
class StateDependentTerm:
    """``d1 = w(t) * (c_y |y| + c_yd |y_dot| + c_0) * sigma`` with ``|w| <= amplitude``.

    ``w(t) = amplitude * cos(omega t + phase)``; ``omega = 0`` gives a constant.
    """

    c_y: float = 0.0
    c_yd: float = 0.0
    c_0: float = 0.0
    amplitude: float = 1.0
    omega: float = 0.0
    phase: float = 0.0
    start: float = 0.0

    def value(self, y, y_dot, sigma, t, t_hold):
        if t_hold < self.start:
            return 0.0
        w = self.amplitude * math.cos(self.omega * t + self.phase)
        return w * (self.c_y * abs(y) + self.c_yd * abs(y_dot) + self.c_0) * sigma


@dataclass(frozen=True)
class OutputTerm:
    """``d2 = a sin(y) + b y sin(omega t)``; satisfies the output-dependent bounds."""

    a: float = 0.0
    b: float = 0.0
    omega: float = 0.0
    start: float = 0.0

    def value(self, y, t, t_hold):
        if t_hold < self.start:
            return 0.0
        return self.a * math.sin(y) + self.b * y * math.sin(self.omega * t)


@dataclass(frozen=True)
class StepTerm:
    value: float
    start: float = 0.0


@dataclass(frozen=True)
class SineTerm:
    amplitude: float
    omega: float
    phase: float = 0.0
    start: float = 0.0


@dataclass(frozen=True)
class DisturbanceSpec:
    """Matched disturbance ``d = d1 + d2 + d3``.

    Schedule switching (``start``) is decided on the step-start time ``t_hold``
    so injections stay aligned to grid points; smooth profiles use the stage
    time ``t``. ``wind`` is only consumed by the full UAV model.
    """

    d1: tuple[StateDependentTerm, ...] = ()
    d2: tuple[OutputTerm, ...] = ()
    d3_steps: tuple[StepTerm, ...] = ()
    d3_sines: tuple[SineTerm, ...] = ()
    wind: tuple[float, float, float] | None = None
    wind_start: float = 0.0
    alpha_d_override: float | None = None

    @property
    def is_zero(self) -> bool:
        return not (self.d1 or self.d2 or self.d3_steps or self.d3_sines)

    def evaluate(self, y, y_dot, sigma, t, t_hold=None):
        """Return ``(d1, d2, d3)`` at stage time ``t``."""
        th = t if t_hold is None else t_hold
        d1 = sum(c.value(y, y_dot, sigma, t, th) for c in self.d1)
        d2 = sum(c.value(y, t, th) for c in self.d2)
        d3 = 0.0
        for s in self.d3_steps:
            if th >= s.start:
                d3 += s.value
        for s in self.d3_sines:
            if th >= s.start:
                d3 += s.amplitude * math.sin(s.omega * t + s.phase)
        return d1, d2, d3

    def total(self, y, y_dot, sigma, t, t_hold=None) -> float:
        return sum(self.evaluate(y, y_dot, sigma, t, t_hold))

    # Declared bound constants. They are time-invariant: the designer is
    # assumed to know the size of the disturbance, not when it arrives.
    @property
    def k_d1(self) -> float:
        return sum(abs(c.amplitude) * c.c_y for c in self.d1)

    @property
    def k_d2(self) -> float:
        return sum(abs(c.amplitude) * c.c_yd for c in self.d1)

    @property
    def k_d3(self) -> float:
        return sum(abs(c.amplitude) * c.c_0 for c in self.d1)

    @property
    def k_d4(self) -> float:
        return sum(abs(c.a) + abs(c.b) for c in self.d2)

    @property
    def k_d5(self) -> float:
        return sum(abs(c.b * c.omega) for c in self.d2)

    @property
    def d3_bound(self) -> float:
        return sum(abs(s.value) for s in self.d3_steps) + sum(abs(s.amplitude) for s in self.d3_sines)

    def alpha_d1(self, y, y_dot, t=0.0) -> float:
        return self.k_d1 * abs(y) + self.k_d2 * abs(y_dot) + self.k_d3

    def alpha_d2(self, y, y_dot, t=0.0) -> float:
        return 0.0

    def alpha_d3(self, y, y_dot, t=0.0) -> float:
        """Bound on ``|d3_dot|`` (steps contribute nothing between jumps)."""
        return sum(abs(s.amplitude * s.omega) for s in self.d3_sines)

    def alpha_d(self, y, y_dot, sigma, t=0.0) -> float:
        """Norm bound on ``|d|`` used by the modulation function."""
        if self.alpha_d_override is not None:
            return self.alpha_d_override
        b = self.alpha_d1(y, y_dot) * abs(sigma)
        b += sum(abs(c.a) + abs(c.b * y) for c in self.d2)
        return b + self.d3_bound


@dataclass(slots=True)
class TrackingSignals:
    y: float
    y_dot: float
    y_m: float
    y_m_dot: float
    y_m_ddot: float
    e: float
    e_dot: float
    sigma: float
    sigma_y: float
    sigma_m: float
    sigma_m_dot: float


def compute_sigma(e: float, e_dot: float, l0: float) -> float:
    if l0 <= 0.0:
        raise ValueError("l0 must be positive")
    return e_dot + l0 * e


def tracking_signals(y, y_dot, y_m, y_m_dot, y_m_ddot, l0) -> TrackingSignals:
    e = y - y_m
    e_dot = y_dot - y_m_dot
    sigma_m = y_m_dot + l0 * y_m
    return TrackingSignals(
        y=y,
        y_dot=y_dot,
        y_m=y_m,
        y_m_dot=y_m_dot,
        y_m_ddot=y_m_ddot,
        e=e,
        e_dot=e_dot,
        sigma=e_dot + l0 * e,
        sigma_y=y_dot + l0 * y,
        sigma_m=sigma_m,
        sigma_m_dot=y_m_ddot + l0 * y_m_dot,
    )


@dataclass(frozen=True)
class NominalControlSpec:
    """Linear nominal control ``u_n = -c_e e - c_sigma sigma - c_m1 y_m_dot - c_m2 y_m_ddot``.

    ``c_sigma_mode`` selects ``"constant"`` or ``"tau_m"``; in the latter the
    coefficient is ``(l0 - a_p_n + 1/tau_m) / k_p_n`` with ``tau_m`` supplied by
    the controller at each evaluation. The bound fields describe the nominal
    law for gain design.
    """

    c_e: float = 0.0
    c_sigma: float = 0.0
    c_m1: float = 0.0
    c_m2: float = 0.0
    c_sigma_mode: str = "constant"
    l0: float = 0.0
    a_p_n: float = 0.0
    k_p_n: float = 1.0
    c_e1: float | None = None
    c_e2: float | None = None
    c_isigma: float = 0.0
    c_ie: float = 0.0

    def __post_init__(self):
        if self.c_sigma_mode not in ("constant", "tau_m"):
            raise ValueError(f"unknown c_sigma_mode {self.c_sigma_mode!r}")
        for f in ("c_e", "c_sigma", "c_m1", "c_m2"):
            if not math.isfinite(getattr(self, f)):
                raise ValueError(f"{f} must be finite")
        # For the linear law the e-gain bounds coincide with |c_e|.
        if self.c_e1 is None:
            object.__setattr__(self, "c_e1", abs(self.c_e))
        if self.c_e2 is None:
            object.__setattr__(self, "c_e2", abs(self.c_e))

    @classmethod
    def tracking(cls, l0, a_p_n, k_p_n, mode="tau_m"):
        """Nominal law that places the sigma dynamics at ``-sigma/tau_m + u + d``.

        ``mode="cancel"`` instead removes the nominal drift, leaving
        ``sigma_dot = k_p (u + d)`` on the nominal plant.
        """
        c_e = (a_p_n - l0) * l0 / k_p_n
        if mode == "tau_m":
            return cls(c_e=c_e, c_m1=-a_p_n / k_p_n, c_m2=-1.0 / k_p_n, c_sigma_mode="tau_m",
                       l0=l0, a_p_n=a_p_n, k_p_n=k_p_n)
        if mode == "cancel":
            return cls(c_e=c_e, c_sigma=(l0 - a_p_n) / k_p_n, c_m1=-a_p_n / k_p_n,
                       c_m2=-1.0 / k_p_n, l0=l0, a_p_n=a_p_n, k_p_n=k_p_n)
        raise ValueError(f"unknown nominal mode {mode!r}")

    def sigma_gain(self, tau_m: float | None = None) -> float:
        if self.c_sigma_mode == "constant":
            return self.c_sigma
        if tau_m is None:
            raise ValueError("time-varying c_sigma needs tau_m")
        return (self.l0 - self.a_p_n + 1.0 / tau_m) / self.k_p_n

    @property
    def sigma_gain_bound(self) -> float:
        """``|c_sigma|`` bound; the tau_m mode is bounded using the static part."""
        if self.c_sigma_mode == "constant":
            return abs(self.c_sigma)
        return abs(self.l0 - self.a_p_n) / self.k_p_n


def nominal_control(spec: NominalControlSpec, s: TrackingSignals, tau_m: float | None = None) -> float:
    return (
        -spec.c_e * s.e
        - spec.sigma_gain(tau_m) * s.sigma
        - spec.c_m1 * s.y_m_dot
        - spec.c_m2 * s.y_m_ddot
    )


def plant_derivative(params: PlantParams, state: PlantState, u_p: float,
                     d: float | DisturbanceSpec = 0.0, t: float = 0.0, sigma: float = 0.0):
    """Return ``(eta_dot, y_dot, y_ddot)``."""
    if isinstance(d, DisturbanceSpec):
        d = d.total(state.y, state.y_dot, sigma, t)
    if not math.isfinite(u_p) or not math.isfinite(d):
        raise IntegrationError("non-finite plant input")
    eta = np.asarray(state.eta, dtype=float)
    if params.n_eta:
        eta_dot = params.A_eta @ eta + params.B_eta * state.y_dot
        ceta = float(params.C_eta @ eta)
    else:
        eta_dot = np.zeros(0)
        ceta = 0.0
    y_ddot = -params.a_p * state.y_dot - ceta + params.k_p * (u_p + d)
    return eta_dot, state.y_dot, y_ddot


@dataclass
class ZeroDynamicsLists:
    """List-based copy of the zero dynamics for the inner simulation loop."""

    A: list = field(default_factory=list)
    B: list = field(default_factory=list)
    C: list = field(default_factory=list)

    @classmethod
    def from_params(cls, p: PlantParams):
        return cls(p.A_eta.tolist(), p.B_eta.tolist(), p.C_eta.tolist())
