"""Variable-gain design, disturbance-bound signals and stability certification.

``design_gains`` turns plant bounds and a handful of free parameters into a
:class:`GainSet`. ``check_design_inequalities``, ``q_positivity_check`` and
``small_gain_check`` verify a gain set independently of how it was produced,
so hand-edited or overridden gains can be certified too.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .plant import DisturbanceSpec, NominalControlSpec, PlantParams

_KP_SAMPLES = 201


@dataclass(frozen=True)
class DesignFree:
    """Free parameters of the design.

    ``phi_b`` overrides the default ``l0/epsilon + eps3``. ``y_m_bound`` and
    ``y_m_dot_bound`` are sup-norms of the reference and its derivative; they
    enter the constant part of the state-dependent disturbance bound.
    """

    l0: float
    epsilon: float
    phi_a: float = 0.0
    delta: float = 0.1
    eps1: float = 1.0
    eps2: float = 0.1
    eps3: float = 0.1
    phi_b: float | None = None
    y_m_bound: float = 0.0
    y_m_dot_bound: float = 0.0

    def __post_init__(self):
        for name in ("l0", "epsilon", "delta", "eps1", "eps2", "eps3"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.phi_a < 0.0:
            raise ValueError("phi_a must be nonnegative")


@dataclass(frozen=True)
class DisturbanceBounds:
    k_d1: float = 0.0
    k_d2: float = 0.0
    k_d3: float = 0.0
    k_d4: float = 0.0
    k_d5: float = 0.0

    @classmethod
    def from_spec(cls, d: DisturbanceSpec | None):
        if d is None:
            return cls()
        return cls(d.k_d1, d.k_d2, d.k_d3, d.k_d4, d.k_d5)


@dataclass(frozen=True)
class GainSet:
    epsilon: float
    gamma: float
    phi_a: float
    phi_b: float
    kappa_a: float
    kappa_b: float
    kappa_c: float
    kappa_d: float
    l0: float
    delta: float
    eps1: float
    eps2: float
    eps3: float
    kappa_e: float = 0.0
    k_sigma: float = 0.0
    kd1_bar: float = 0.0
    kd2_bar: float = 0.0
    kd3_bar: float = 0.0
    c_isigma: float = 0.0
    c_ie: float = 0.0
    k_p_lower: float = 1.0
    k_p_upper: float = 1.0

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _kp_grid(lo, hi):
    if hi <= lo:
        return np.array([lo])
    return np.linspace(lo, hi, _KP_SAMPLES)


def sigma_coupling_bound(plant: PlantParams, nominal: NominalControlSpec, l0: float) -> float:
    """Bound ``c`` with ``|k_p u_d + (l0 - a_p) sigma| <= c |sigma|`` over the uncertainty box.

    The expression is affine in ``(k_p, a_p)``, so the box vertices suffice.
    """
    cs = nominal.sigma_gain_bound if nominal.c_sigma_mode == "tau_m" else nominal.c_sigma
    vals = [abs(-kp * cs + l0 - ap)
            for kp in (plant.k_p_lower, plant.k_p_upper)
            for ap in (-plant.a_p_bound, plant.a_p_bound)]
    return max(vals)


def _state_bound_constants(plant, nominal, kd: DisturbanceBounds, free: DesignFree):
    kp_hi, a_bar, l0 = plant.k_p_upper, plant.a_p_bound, free.l0
    c_sig = sigma_coupling_bound(plant, nominal, l0)
    kd1_bar = kp_hi * (kd.k_d1 + kd.k_d2 * l0)
    kd2_bar = kp_hi * kd.k_d2
    kd3_bar = c_sig + kp_hi * (kd.k_d1 * free.y_m_bound + kd.k_d2 * free.y_m_dot_bound + kd.k_d3)
    cb = plant.norm_CB
    k_sigma = (l0 + a_bar) * l0 + kp_hi * nominal.c_e2 + kp_hi * kd.k_d4 + cb
    kappa_e = l0 * ((l0 + a_bar) * l0 + nominal.c_e2 + kp_hi * l0 * kd.k_d4 + cb) + kp_hi * kd.k_d5
    return kd1_bar, kd2_bar, kd3_bar, k_sigma, kappa_e


def design_gains(plant: PlantParams, nominal: NominalControlSpec, free: DesignFree,
                 disturbance: DisturbanceSpec | DisturbanceBounds | None = None) -> GainSet:
    """Compute a gain set meeting every design inequality.

    Strict inequalities get the ``eps2`` slack added on top of their bound.
    """
    kd = disturbance if isinstance(disturbance, DisturbanceBounds) else DisturbanceBounds.from_spec(disturbance)
    kp_lo, kp_hi = plant.k_p_lower, plant.k_p_upper
    if kp_lo <= 0.0:
        raise ValueError("k_p_lower must be positive")
    eps, l0, e1, e2 = free.epsilon, free.l0, free.eps1, free.eps2
    gamma = (1.0 + e1) / (4.0 * eps * kp_lo ** 2) + 4.0 * eps ** 2 / kp_lo
    phi_b = l0 / eps + free.eps3 if free.phi_b is None else free.phi_b
    if not phi_b > 0.0:
        raise ValueError("phi_b must be positive")
    kd1_bar, kd2_bar, kd3_bar, k_sigma, kappa_e = _state_bound_constants(plant, nominal, kd, free)
    kappa_c = max((8.0 * eps ** 2 + 2.0 * gamma * kp_hi) / e1, (kd3_bar * phi_b + k_sigma) / phi_b ** 2) + e2
    kappa_b = (kd1_bar * phi_b + kp_hi * nominal.c_ie) / phi_b ** 2 + e2
    kappa_a = max((kd2_bar * phi_b + kp_hi * nominal.c_isigma) / phi_b ** 2, kappa_b / l0) + e2
    kp = _kp_grid(kp_lo, kp_hi)
    kappa_d = float(np.max((8 * eps ** 2 * gamma * kp + 4 * eps ** 2)
                           / (4 * eps * kp * (gamma * kp - 4 * eps ** 2)))) + e2
    return GainSet(
        epsilon=eps, gamma=gamma, phi_a=free.phi_a, phi_b=phi_b,
        kappa_a=kappa_a, kappa_b=kappa_b, kappa_c=kappa_c, kappa_d=kappa_d,
        l0=l0, delta=free.delta, eps1=e1, eps2=e2, eps3=free.eps3,
        kappa_e=kappa_e, k_sigma=k_sigma, kd1_bar=kd1_bar, kd2_bar=kd2_bar, kd3_bar=kd3_bar,
        c_isigma=nominal.c_isigma, c_ie=nominal.c_ie, k_p_lower=kp_lo, k_p_upper=kp_hi,
    )


@dataclass(frozen=True)
class InequalityResult:
    id: str
    label: str
    lhs: float
    rhs: float
    ok: bool

    def to_dict(self):
        return asdict(self)


def check_design_inequalities(g: GainSet, plant: PlantParams | None = None) -> list[InequalityResult]:
    """Re-check every design row for ``g``.

    Rows involving the uncertain ``k_p`` are checked over a dense grid of the
    ``[k_p_lower, k_p_upper]`` interval, taking the worst point.
    """
    lo = g.k_p_lower if plant is None else plant.k_p_lower
    hi = g.k_p_upper if plant is None else plant.k_p_upper
    kp = _kp_grid(lo, hi)
    eps, gam, pb = g.epsilon, g.gamma, g.phi_b
    out = []

    def add(id_, label, lhs, rhs):
        out.append(InequalityResult(id_, label, float(lhs), float(rhs), bool(lhs > rhs)))

    base = 4 * eps * kp * (gam * kp - 4 * eps ** 2)
    add("gamma", "4*eps*k_p*(gamma*k_p - 4*eps^2) > 1", base.min(), 1.0)
    add("phi_b", "phi_b > l0/eps", pb, g.l0 / eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(base > 1.0, (8 * eps ** 2 + 2 * gam * kp) / (base - 1.0), np.inf)
        kd_req = np.where(base > 0.0, (8 * eps ** 2 * gam * kp + 4 * eps ** 2) / base, np.inf)
    add("kappa_c", "kappa_c > max{(8eps^2 + 2gamma*k_p)/[4eps*k_p(gamma*k_p - 4eps^2) - 1], "
        "(kd3_bar*phi_b + k_sigma)/phi_b^2}",
        g.kappa_c, max(float(first.max()), (g.kd3_bar * pb + g.k_sigma) / pb ** 2))
    add("kappa_b", "kappa_b > (kd1_bar*phi_b + k_p*c_ie)/phi_b^2",
        g.kappa_b, (g.kd1_bar * pb + hi * g.c_ie) / pb ** 2)
    add("kappa_a", "kappa_a > max{(kd2_bar*phi_b + k_p*c_isigma)/phi_b^2, kappa_b/l0}",
        g.kappa_a, max((g.kd2_bar * pb + hi * g.c_isigma) / pb ** 2, g.kappa_b / g.l0))
    add("kappa_d", "kappa_d > (8eps^2*gamma*k_p + 4eps^2)/(4eps*k_p(gamma*k_p - 4eps^2))",
        g.kappa_d, float(kd_req.max()))
    return out


def variable_gains(sigma: float, e: float, g: GainSet):
    """Return ``(kappa1, kappa2)``."""
    k = g.kappa_a * abs(sigma) + g.kappa_b * abs(e) + g.kappa_c
    k1 = k * k + g.kappa_d
    return k1, 2.0 * g.epsilon * k1 + g.gamma


def rho_bounds(sigma, e, g: GainSet):
    """Norm bounds ``(rho1, rho2)`` on the normalized disturbance coordinates."""
    s, ee = np.abs(sigma), np.abs(e)
    r1 = (g.kd1_bar * ee + g.kd2_bar * s + g.kd3_bar) / g.phi_b
    r2 = (g.k_sigma + g.c_isigma * s + g.c_ie * ee) / g.phi_b ** 2
    return r1, r2


def q_matrix(k_p, kappa1, alpha1, alpha2, g: GainSet):
    """Entries ``(a, b, c)`` of the symmetric matrix ``Q - 2 eps I = [[a, b], [b, c]]``."""
    eps, gam = g.epsilon, g.gamma
    a = (2 * (gam * k_p - 4 * eps ** 2) * k_p * kappa1 + 4 * eps * k_p * gam
         - 2 * gam * k_p * alpha1 + 4 * eps * alpha2 - 2 * eps)
    b = 2 * eps * alpha1 - alpha2
    c = 2 * eps * np.ones_like(np.asarray(a, dtype=float))
    return a, b, c


def _min_eig_2x2(a, b, c):
    return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b ** 2)


@dataclass
class GridReport:
    min_eigenvalue: float
    argmin: dict
    n_points: int
    passed: bool
    sigma_box: float
    e_box: float

    def to_dict(self):
        return asdict(self)


def q_positivity_check(g: GainSet, sigma_box: float = 10.0, e_box: float = 10.0, n: int = 101,
                       k_p_values=None, interior_kp: bool = True) -> GridReport:
    """Minimum eigenvalue of ``Q - 2 eps I`` over a (sigma, e) grid.

    For each grid point, ``k_p`` takes the interval ends (and the midpoint) and
    ``(alpha1, alpha2)`` the four vertices of their bound box; the matrix is
    affine in the alphas and the minimum eigenvalue is concave, so the
    vertices are the worst case in those variables.
    """
    if n < 1:
        raise ValueError("empty grid")
    s = np.linspace(-sigma_box, sigma_box, n)
    e = np.linspace(-e_box, e_box, n)
    S, E = np.meshgrid(s, e, indexing="ij")
    k1, _ = variable_gains(S, E, g)
    r1, r2 = rho_bounds(S, E, g)
    if k_p_values is None:
        k_p_values = [g.k_p_lower, g.k_p_upper]
        if interior_kp and g.k_p_upper > g.k_p_lower:
            k_p_values.append(0.5 * (g.k_p_lower + g.k_p_upper))
    best = math.inf
    arg = {}
    count = 0
    for kp in k_p_values:
        for s1 in (-1.0, 1.0):
            for s2 in (-1.0, 1.0):
                a, b, c = q_matrix(kp, k1, s1 * r1, s2 * r2, g)
                lam = _min_eig_2x2(a, b, c)
                count += lam.size
                i = int(np.argmin(lam))
                if lam.flat[i] < best:
                    best = float(lam.flat[i])
                    iu = np.unravel_index(i, lam.shape)
                    arg = {"sigma": float(S[iu]), "e": float(E[iu]), "k_p": float(kp),
                           "alpha1": float(s1 * r1[iu]), "alpha2": float(s2 * r2[iu])}
    return GridReport(best, arg, count, bool(best > 0.0), sigma_box, e_box)


def lyapunov_P(g: GainSet, k_p: float) -> np.ndarray:
    return np.array([[g.gamma * k_p, -2.0 * g.epsilon], [-2.0 * g.epsilon, 1.0]])


def zero_dynamics_lyapunov(plant: PlantParams, l0: float):
    """``(A_x, B_sigma, P_eta)`` for the internal state ``x = (eta, e)``."""
    m = plant.n_eta
    A = np.zeros((m + 1, m + 1))
    if m:
        A[:m, :m] = plant.A_eta
        A[:m, m] = -l0 * plant.B_eta
    A[m, m] = -l0
    Bs = np.concatenate([plant.B_eta, [1.0]])
    P_eta = solve_continuous_lyapunov(A.T, -2.0 * np.eye(m + 1))
    return A, Bs, 0.5 * (P_eta + P_eta.T)


def small_gain_requirement(norm_PetaBs, norm_PB, coupling, lmax_P, lmin_P, lmax_Peta, lmin_Peta, eps):
    """Lower bound on ``phi_b**2`` demanded by the interconnection argument."""
    return (norm_PetaBs * norm_PB * coupling * lmax_P * lmax_Peta
            / (4.0 * eps * math.sqrt(lmin_P) * lmin_Peta ** 1.5))


@dataclass
class SmallGainReport:
    margin: float
    required_phi_b_sq: float
    phi_b_sq: float
    worst_k_p: float
    P: list
    P_eta: list
    interconnection_g1: float
    interconnection_g2: float
    passed: bool
    has_zero_dynamics: bool

    def to_dict(self):
        return asdict(self)


def small_gain_check(g: GainSet, plant: PlantParams) -> SmallGainReport:
    """Margin ``phi_b**2 - required``; requirement taken at the worst ``k_p`` end."""
    _, Bs, P_eta = zero_dynamics_lyapunov(plant, g.l0)
    le = np.linalg.eigvalsh(P_eta)
    norm_PetaBs = float(np.linalg.norm(P_eta @ Bs))
    coupling = g.kappa_e + plant.norm_CA
    worst = None
    for kp in {plant.k_p_lower, plant.k_p_upper}:
        det = g.gamma * kp - 4.0 * g.epsilon ** 2
        if det <= 0.0:
            raise ValueError(f"P is not positive definite at k_p={kp} (gamma*k_p - 4 eps^2 = {det})")
        P = lyapunov_P(g, kp)
        lp = np.linalg.eigvalsh(P)
        norm_PB = float(np.linalg.norm(P[:, 1]))
        req = small_gain_requirement(norm_PetaBs, norm_PB, coupling, lp[-1], lp[0], le[-1], le[0], g.epsilon)
        if worst is None or req > worst[0]:
            # interconnection gains of the two ISS subsystems
            ig1 = norm_PB * coupling * lp[-1] / (g.epsilon * g.phi_b * math.sqrt(lp[0]) * math.sqrt(le[0]))
            ig2 = norm_PetaBs * le[-1] / (4.0 * g.phi_b * le[0])
            worst = (req, kp, P, ig1, ig2)
    req, kp, P, ig1, ig2 = worst
    margin = g.phi_b ** 2 - req
    return SmallGainReport(float(margin), float(req), g.phi_b ** 2, float(kp), P.tolist(), P_eta.tolist(),
                           float(ig1), float(ig2), bool(margin >= 0.0), plant.n_eta > 0)


def dynamic_functions_positive(g: GainSet, sigma_box: float, e_box: float, n: int = 101) -> bool:
    """True when ``k_o tau_av`` and ``tau_m`` are well defined over the box."""
    s = np.linspace(-sigma_box, sigma_box, n)
    e = np.linspace(-e_box, e_box, n)
    S, E = np.meshgrid(s, e, indexing="ij")
    r = np.sqrt(np.abs(S))
    d = g.delta
    ph1 = g.phi_a * S / (r + d) + g.phi_b * S
    ph1p = g.phi_a * (r + 2 * d) / (2 * (r + d) ** 2) + g.phi_b
    kk = g.kappa_a * np.abs(S) + g.kappa_b * np.abs(E) + g.kappa_c
    k1 = kk * kk + g.kappa_d
    k1s = 2 * kk * g.kappa_a * np.sign(S)
    k1e = 2 * kk * g.kappa_b * np.sign(E)
    k2 = 2 * g.epsilon * k1 + g.gamma
    num = k1s * ph1 + k1 * ph1p
    den = k1e * (-g.l0 * E + S) + k2 * ph1p
    return bool(np.all(num > 0) and np.all(den > 0))


@dataclass
class Certificate:
    inequalities: list
    q_positivity: GridReport
    small_gain: SmallGainReport
    dynamic_functions_ok: bool
    gains: GainSet
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = (all(r.ok for r in self.inequalities) and self.q_positivity.passed
                       and self.small_gain.passed and self.dynamic_functions_ok)

    @property
    def failed(self) -> list[str]:
        names = [r.label for r in self.inequalities if not r.ok]
        if not self.q_positivity.passed:
            names.append("Q - 2*eps*I > 0")
        if not self.small_gain.passed:
            names.append("small-gain: phi_b^2 >= required")
        if not self.dynamic_functions_ok:
            names.append("k_o*tau_av > 0 and tau_m > 0")
        return names

    def to_dict(self):
        return {
            "passed": self.passed,
            "failed": self.failed,
            "inequalities": [r.to_dict() for r in self.inequalities],
            "q_positivity": self.q_positivity.to_dict(),
            "small_gain": self.small_gain.to_dict(),
            "dynamic_functions_ok": self.dynamic_functions_ok,
            "gains": self.gains.to_dict(),
        }


def certify(g: GainSet, plant: PlantParams, sigma_box: float = 10.0, e_box: float = 10.0,
            n: int = 101) -> Certificate:
    return Certificate(
        inequalities=check_design_inequalities(g, plant),
        q_positivity=q_positivity_check(g, sigma_box, e_box, n),
        small_gain=small_gain_check(g, plant),
        dynamic_functions_ok=dynamic_functions_positive(g, sigma_box, e_box, n),
        gains=g,
    )


def lyapunov_monitor(t, sigma, e, sigma_dot, g: GainSet, k_p: float, beta1=None, eta_norm=None,
                     beta_m_bar=0.0, t_s: float = 0.0, slack: float = 0.0, norm_CA: float = 0.0):
    """Evaluate ``V = zeta' P zeta`` along a run and compare with the comparison bound.

    ``zeta = (phi1_hat, z)`` with ``z = sigma_dot + k_p kappa1 phi1_hat - beta1``.
    The bound integrates ``W' = -(eps phi_b / lmax) W + (|PB| / lmin^0.5) forcing``
    from ``W(t_s) = W_v(t_s)`` by exact exponential discretization of
    piecewise-constant forcing. Returns a dict of arrays and a pass flag.
    """
    t = np.asarray(t, float)
    sigma = np.asarray(sigma, float)
    e = np.asarray(e, float)
    sd = np.asarray(sigma_dot, float)
    r = np.sqrt(np.abs(sigma))
    ph1 = g.phi_a * sigma / (r + g.delta) + g.phi_b * sigma
    kk = g.kappa_a * np.abs(sigma) + g.kappa_b * np.abs(e) + g.kappa_c
    k1 = kk * kk + g.kappa_d
    b1 = np.zeros_like(sigma) if beta1 is None else np.asarray(beta1, float)
    z = sd + k_p * k1 * ph1 - b1
    P = lyapunov_P(g, k_p)
    V = P[0, 0] * ph1 ** 2 + 2 * P[0, 1] * ph1 * z + P[1, 1] * z ** 2
    W = np.sqrt(np.maximum(V, 0.0))
    lp = np.linalg.eigvalsh(P)
    rate = g.epsilon * g.phi_b / lp[-1]
    gain = float(np.linalg.norm(P[:, 1])) / math.sqrt(lp[0])
    en = np.zeros_like(sigma) if eta_norm is None else np.asarray(eta_norm, float)
    forcing = gain * (norm_CA * en + g.kappa_e * np.abs(e) + beta_m_bar)
    mask = t >= t_s
    idx = np.nonzero(mask)[0]
    Wb = np.full_like(W, np.nan)
    if idx.size:
        i0 = idx[0]
        Wb[i0] = W[i0]
        for k in range(i0, len(t) - 1):
            h = t[k + 1] - t[k]
            a = math.exp(-rate * h)
            Wb[k + 1] = a * Wb[k] + (1 - a) * forcing[k] / rate
    excess = np.where(mask, W - Wb - slack, -np.inf)
    return {"V": V, "W_v": W, "W_bound": Wb, "rate": rate, "z": z,
            "max_excess": float(np.max(excess)) if idx.size else math.nan,
            "passed": bool(idx.size and np.max(excess) <= 0.0)}
