"""Scenario configuration: validation, object construction and the ``integrate`` entry point.

A scenario is a nested mapping (normally loaded from YAML). Top-level keys::

    name, plant, dt, t_end, integrator, seed, record_every, allow_uncertified,
    channels: {<name>: {...}}, uav: {...}

``plant`` is ``abstract``, ``uav_full``, ``uav_first_order`` or ``uav_normal_form``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, fields

from ..controller_zoo import StaController, StaParams
from ..dssc import DsscController, DsscParams
from ..gain_design import Certificate, DesignFree, GainSet, certify, design_gains
from ..plant import (DisturbanceSpec, NominalControlSpec, OutputTerm, PlantParams, SineTerm,
                     StateDependentTerm, StepTerm)
from ..uav.inner import channel_gains, normal_form_view
from ..uav.params import InnerGains, UavParams
from .engine import Channel, NullController, UAV_CHANNELS, UavSetup, simulate_abstract, simulate_uav
from .metrics import detect_sliding
from .signals import CommandSchedule, Trajectory
from .trace import SimTrace
from .unmodelled import UnmodelledSpec

PLANTS = ("abstract", "uav_full", "uav_first_order", "uav_normal_form")
CONTROLLERS = ("dssc", "sta", "vgsta_approx", "pi", "none")
TOP_KEYS = {"name", "description", "plant", "dt", "t_end", "integrator", "seed", "record_every",
            "allow_uncertified", "channels", "uav", "certify_box", "metrics"}
INTEGRATORS = ("rk4", "heun", "euler")
REQUIRED = ("plant", "dt", "t_end", "channels")


class ConfigError(ValueError):
    """Invalid scenario; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class CertificationError(RuntimeError):
    def __init__(self, channel: str, certificate: Certificate):
        super().__init__(f"channel {channel}: gain certificate failed: {certificate.failed}")
        self.channel = channel
        self.certificate = certificate


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _num(d, key, path, default=None, positive=False, nonneg=False):
    if key not in d or d[key] is None:
        if default is None:
            raise ConfigError(f"{path}.{key}", "required")
        return default
    try:
        v = float(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {d[key]!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", "must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{path}.{key}", "must be nonnegative")
    return v


def _keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(path, f"expected a mapping, got {type(d).__name__}")
    bad = set(d) - set(allowed)
    if bad:
        raise ConfigError(f"{path}.{sorted(bad)[0]}", f"unknown key (allowed: {sorted(allowed)})")


def _dataclass_kwargs(cls, d, path, skip=()):
    names = {f.name for f in fields(cls)} - set(skip)
    _keys(d, names | set(skip), path)
    return {k: v for k, v in d.items() if k in names}


def _wrap(fn, path):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass
class ScenarioConfig:
    """Validated scenario plus the raw mapping it came from."""

    raw: dict
    name: str
    plant: str
    dt: float
    t_end: float
    integrator: str = "rk4"
    seed: int = 0
    record_every: int = 1
    allow_uncertified: bool = False
    channels: dict = field(default_factory=dict)
    uav: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def metric_windows(cfg: dict) -> dict:
    """Named ``(t0, t1)`` windows from the optional ``metrics.windows`` block."""
    m = cfg.get("metrics") or {}
    _keys(m, {"windows"}, "metrics")
    out = {}
    for name, w in (m.get("windows") or {}).items():
        try:
            a, b = (float(v) for v in w)
        except (TypeError, ValueError):
            raise ConfigError(f"metrics.windows.{name}", "expected [t0, t1]") from None
        out[str(name)] = (a, b)
    return out


def validate(cfg: dict, overrides: dict | None = None) -> ScenarioConfig:
    """Check structure and scalar fields; deep checks happen in :func:`build`."""
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigError("", f"empty configuration; required keys: {', '.join(REQUIRED)}")
    cfg = copy.deepcopy(cfg)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    missing = [k for k in REQUIRED if k not in cfg]
    if missing:
        raise ConfigError(missing[0], f"required key missing (required: {', '.join(REQUIRED)})")
    _keys(cfg, TOP_KEYS, "")
    if cfg["plant"] not in PLANTS:
        raise ConfigError("plant", f"must be one of {PLANTS}")
    dt = _num(cfg, "dt", "", positive=True)
    t_end = _num(cfg, "t_end", "", positive=True)
    if t_end <= dt:
        raise ConfigError("t_end", "must exceed dt")
    if cfg.get("integrator", "rk4") not in INTEGRATORS:
        raise ConfigError("integrator", f"must be one of {INTEGRATORS}")
    windows = metric_windows(cfg)
    for w, (a, b) in windows.items():
        if not 0.0 <= a < b <= t_end:
            raise ConfigError(f"metrics.windows.{w}", f"window ({a}, {b}) outside [0, {t_end}]")
    if not isinstance(cfg["channels"], dict) or not cfg["channels"]:
        raise ConfigError("channels", "at least one channel is required")
    if cfg["plant"] != "abstract":
        bad = set(cfg["channels"]) - set(UAV_CHANNELS)
        if bad:
            raise ConfigError(f"channels.{sorted(bad)[0]}", f"UAV channels are {UAV_CHANNELS}")
    for name, ch in cfg["channels"].items():
        _check_schedule(ch or {}, f"channels.{name}", t_end)
    return ScenarioConfig(
        raw=cfg, name=str(cfg.get("name", "scenario")), plant=cfg["plant"], dt=dt, t_end=t_end,
        integrator=str(cfg.get("integrator", "rk4")), seed=int(cfg.get("seed", 0)),
        record_every=int(cfg.get("record_every", 1)),
        allow_uncertified=bool(cfg.get("allow_uncertified", False)),
        channels=cfg["channels"], uav=cfg.get("uav") or {},
    )


def _check_schedule(ch, path, t_end):
    dist = ch.get("disturbance") or {}
    starts = []
    for part in ("d1", "d2"):
        starts += [(f"{path}.disturbance.{part}", s.get("start", 0.0)) for s in dist.get(part, [])]
    d3 = dist.get("d3") or {}
    starts += [(f"{path}.disturbance.d3", s.get("start", 0.0)) for s in d3.get("steps", []) + d3.get("sines", [])]
    starts += [(f"{path}.command", s.get("start", 0.0)) for s in ch.get("command", []) or []]
    for p, s in starts:
        if not 0.0 <= float(s) <= t_end:
            raise ConfigError(p, f"schedule start {s} outside [0, {t_end}]")


def parse_disturbance(d, path) -> DisturbanceSpec:
    if not d:
        return DisturbanceSpec()
    _keys(d, {"d1", "d2", "d3", "alpha_d"}, path)
    d1 = tuple(_wrap(lambda s=s: StateDependentTerm(**s), f"{path}.d1") for s in d.get("d1", []))
    d2 = tuple(_wrap(lambda s=s: OutputTerm(**s), f"{path}.d2") for s in d.get("d2", []))
    d3 = d.get("d3") or {}
    _keys(d3, {"steps", "sines"}, f"{path}.d3")
    steps = tuple(_wrap(lambda s=s: StepTerm(**s), f"{path}.d3.steps") for s in d3.get("steps", []))
    sines = tuple(_wrap(lambda s=s: SineTerm(**s), f"{path}.d3.sines") for s in d3.get("sines", []))
    ad = d.get("alpha_d")
    return DisturbanceSpec(d1, d2, steps, sines, alpha_d_override=None if ad is None else float(ad))


def parse_plant(d, path) -> PlantParams:
    d = d or {}
    kw = _dataclass_kwargs(PlantParams, d, path)
    return _wrap(lambda: PlantParams(**kw), path)


def parse_nominal(d, plant: PlantParams | None, l0: float, path) -> NominalControlSpec | None:
    if not d:
        return None
    d = dict(d)
    mode = d.pop("mode", "linear")
    if mode == "none":
        return None
    if mode in ("tau_m", "cancel"):
        _keys(d, {"a_p_n", "k_p_n"}, path)
        a_n = float(d.get("a_p_n", plant.a_p if plant else 0.0))
        k_n = float(d.get("k_p_n", plant.k_p if plant else 1.0))
        return _wrap(lambda: NominalControlSpec.tracking(l0, a_n, k_n, mode), path)
    if mode == "linear":
        kw = _dataclass_kwargs(NominalControlSpec, d, path)
        kw.setdefault("l0", l0)
        return _wrap(lambda: NominalControlSpec(**kw), path)
    raise ConfigError(f"{path}.mode", "must be tau_m, cancel, linear or none")


def _gain_set(cd, plant, nominal, dist, traj, l0, path):
    gd = dict(cd.get("gain_design") or {})
    if not gd and not cd.get("gains"):
        raise ConfigError(f"{path}.gain_design", "required for this controller")
    ym, ymd, _ = traj.sup_bounds
    gd.setdefault("l0", l0)
    gd.setdefault("y_m_bound", ym)
    gd.setdefault("y_m_dot_bound", ymd)
    free = _wrap(lambda: DesignFree(**_dataclass_kwargs(DesignFree, gd, f"{path}.gain_design")),
                 f"{path}.gain_design")
    nom = nominal or NominalControlSpec()
    g = design_gains(plant, nom, free, dist)
    over = cd.get("gains") or {}
    if over:
        _keys(over, {f.name for f in fields(GainSet)}, f"{path}.gains")
        g = g.with_overrides(**{k: float(v) for k, v in over.items()})
    return g


def _gate(cert, path, mode):
    """Decide whether to construct a controller whose gains carry ``cert``.

    ``mode`` is ``strict`` (raise on failure), ``allow`` (construct anyway) or
    ``certify`` (skip construction of failing controllers).
    """
    if cert is None or cert.passed or mode == "allow":
        return True
    if mode == "certify":
        return False
    raise CertificationError(path.split(".")[1] if path.count(".") >= 2 else path, cert)


def build_controller(cd, plant, nominal, dist, traj, l0, path, box, mode="strict"):
    cd = dict(cd or {"type": "none"})
    typ = cd.pop("type", None)
    if typ not in CONTROLLERS:
        raise ConfigError(f"{path}.type", f"must be one of {CONTROLLERS}")
    cert = None
    if typ == "none":
        _keys(cd, set(), path)
        return NullController(), None
    if typ == "dssc":
        extra = {"gain_design", "gains", "alpha_d"}
        kw = _dataclass_kwargs(DsscParams, cd, path, skip=extra)
        kw.setdefault("l0", l0)
        params = _wrap(lambda: DsscParams(**kw), path)
        gains = None
        if params.selector == "table1_vgsta":
            gains = _gain_set(cd, plant, nominal, dist, traj, params.l0, path)
            params = _wrap(lambda: DsscParams(**{**kw, "delta": gains.delta, "phi_a": gains.phi_a,
                                                 "phi_b": gains.phi_b, "epsilon": gains.epsilon}), path)
            cert = certify(gains, plant, *box)
            if not _gate(cert, path, mode):
                return None, cert
        ad = cd.get("alpha_d", dist)
        return _wrap(lambda: DsscController(params, plant, gains, ad), path), cert
    extra = {"gain_design", "gains", "k_o", "tau_av", "tau_m"}
    kw = _dataclass_kwargs(StaParams, cd, path, skip=extra)
    kw.setdefault("l0", l0)
    if typ == "pi":
        kw["variant"] = "pi"
        if "g1" not in kw:
            k_o, tau_av, tau_m = (_num(cd, k, path, positive=True) for k in ("k_o", "tau_av", "tau_m"))
            kw["g1"], kw["g2"] = 1.0 / (k_o * tau_av), 1.0 / (k_o * tau_av * tau_m)
    if typ == "vgsta_approx":
        kw["variant"] = "vgsta_approx"
        kw["gains"] = _gain_set(cd, plant, nominal, dist, traj, l0, path)
        cert = certify(kw["gains"], plant, *box)
        if not _gate(cert, path, mode):
            return None, cert
    return StaController(_wrap(lambda: StaParams(**kw), path)), cert


CHANNEL_KEYS = {"plant", "initial", "trajectory", "disturbance", "nominal", "controller", "command",
                "unmodelled", "l0", "bounds"}


def _channel_l0(ch):
    if "l0" in ch:
        return float(ch["l0"])
    c = ch.get("controller") or {}
    if "l0" in c:
        return float(c["l0"])
    gd = c.get("gain_design") or {}
    return float(gd.get("l0", 1.0))


def build_channel(name, ch, plant: PlantParams | None, path, box, y0=0.0, yd0=0.0, mode="strict"):
    ch = ch or {}
    _keys(ch, CHANNEL_KEYS, path)
    l0 = _channel_l0(ch)
    if l0 <= 0:
        raise ConfigError(f"{path}.l0", "must be positive")
    traj = _wrap(lambda: Trajectory.from_config(ch.get("trajectory")), f"{path}.trajectory")
    dist = parse_disturbance(ch.get("disturbance"), f"{path}.disturbance")
    nominal = parse_nominal(ch.get("nominal"), plant, l0, f"{path}.nominal")
    bounds = plant
    if ch.get("bounds"):
        b = dict(ch["bounds"])
        _keys(b, {"k_p", "a_p", "k_p_lower", "k_p_upper", "a_p_bound"}, f"{path}.bounds")
        base = plant or PlantParams()
        b.setdefault("k_p", base.k_p)
        b.setdefault("a_p", base.a_p)
        bounds = _wrap(lambda: PlantParams(A_eta=base.A_eta, B_eta=base.B_eta, C_eta=base.C_eta, **b),
                       f"{path}.bounds")
    if bounds is None:
        bounds = PlantParams()
    ctrl, cert = build_controller(ch.get("controller"), bounds, nominal, dist, traj, l0,
                                  f"{path}.controller", box, mode)
    um = ch.get("unmodelled") or {}
    _keys(um, {"order", "mu"}, f"{path}.unmodelled")
    unmod = _wrap(lambda: UnmodelledSpec(int(um.get("order", 1)), float(um.get("mu", 0.0))),
                  f"{path}.unmodelled")
    cmd = _wrap(lambda: CommandSchedule.from_config(ch.get("command")), f"{path}.command")
    init = ch.get("initial") or {}
    _keys(init, {"y", "y_dot", "eta"}, f"{path}.initial")
    return Channel(
        name=name, controller=ctrl, l0=l0, trajectory=traj, nominal=nominal, disturbance=dist,
        unmodelled=unmod, command=cmd, plant=plant,
        y0=float(init.get("y", y0)), y_dot0=float(init.get("y_dot", yd0)),
        eta0=tuple(float(v) for v in init.get("eta", ())),
    ), cert


UAV_KEYS = {"params", "inner", "initial", "wind", "reortho_tol"}


def build_uav_setup(u, path="uav") -> UavSetup:
    u = u or {}
    _keys(u, UAV_KEYS, path)
    params = _wrap(lambda: UavParams.from_dict(u.get("params")), f"{path}.params")
    gains = _wrap(lambda: InnerGains.from_dict(u.get("inner")), f"{path}.inner")
    init = u.get("initial") or {}
    _keys(init, {"p", "v", "euler", "Omega"}, f"{path}.initial")
    wind = u.get("wind") or {}
    _keys(wind, {"value", "start"}, f"{path}.wind")
    vec = lambda k, src: tuple(float(a) for a in src.get(k, (0.0, 0.0, 0.0)))  # noqa: E731
    return UavSetup(params=params, gains=gains, p0=vec("p", init), v0=vec("v", init),
                    euler0=vec("euler", init), Omega0=vec("Omega", init), wind=vec("value", wind),
                    wind_start=float(wind.get("start", 0.0)),
                    reortho_tol=float(u.get("reortho_tol", 1e-8)))


@dataclass
class BuiltScenario:
    config: ScenarioConfig
    channels: list
    uav: UavSetup | None
    certificates: dict


def _uav_channel_plant(name, setup: UavSetup, mode: str) -> PlantParams:
    kp, ki = channel_gains(setup.gains)[name]
    if mode == "uav_first_order":
        ki = 0.0
    nf = normal_form_view(kp, ki)
    if nf.first_order:
        return PlantParams(k_p=nf.k_p, a_p=nf.a_p)
    return PlantParams(k_p=nf.k_p, a_p=nf.a_p, A_eta=[[nf.A_eta]], B_eta=[nf.B_eta], C_eta=[nf.C_eta])


def build(cfg: ScenarioConfig, allow_uncertified: bool | None = None, certify_only: bool = False) -> BuiltScenario:
    """Construct channels and UAV setup.

    Gain certificates are evaluated before any controller is constructed; a
    failing certificate raises :class:`CertificationError` unless uncertified
    runs are allowed. With ``certify_only`` failing controllers are left as
    ``None`` so that every certificate can be reported.
    """
    allow = cfg.allow_uncertified if allow_uncertified is None else allow_uncertified
    mode = "certify" if certify_only else ("allow" if allow else "strict")
    box_cfg = cfg.raw.get("certify_box") or {}
    box = (float(box_cfg.get("sigma", 10.0)), float(box_cfg.get("e", 10.0)), int(box_cfg.get("n", 101)))
    setup = None
    if cfg.plant != "abstract":
        setup = build_uav_setup(cfg.uav)
    chans, certs = [], {}
    for name, ch in cfg.channels.items():
        path = f"channels.{name}"
        y0 = yd0 = 0.0
        if cfg.plant == "abstract":
            plant = parse_plant((ch or {}).get("plant"), f"{path}.plant")
        else:
            plant = _uav_channel_plant(name, setup, "uav_first_order" if cfg.plant == "uav_full" else cfg.plant)
            i = UAV_CHANNELS.index(name)
            y0 = setup.euler0[2] if name == "psi" else setup.p0[i]
            yd0 = 0.0 if name == "psi" else setup.v0[i]
            if (ch or {}).get("plant"):
                raise ConfigError(f"{path}.plant", "UAV channels take their model from the inner gains")
        c, cert = build_channel(name, ch, plant, path, box, y0, yd0, mode)
        if cfg.plant == "uav_full":
            c.plant = None
        chans.append(c)
        if cert is not None:
            certs[name] = cert
    return BuiltScenario(cfg, chans, setup, certs)


def check_certificates(built: BuiltScenario, allow_uncertified: bool | None = None):
    allow = built.config.allow_uncertified if allow_uncertified is None else allow_uncertified
    for name, cert in built.certificates.items():
        if not cert.passed and not allow:
            raise CertificationError(name, cert)


def integrate(config, overrides: dict | None = None, allow_uncertified: bool | None = None) -> SimTrace:
    """Validate, build and run a scenario; returns the trace."""
    cfg = config if isinstance(config, ScenarioConfig) else validate(config, overrides)
    built = build(cfg, allow_uncertified)
    meta = {"config_hash": cfg.hash, "name": cfg.name, "plant": cfg.plant, "seed": cfg.seed}
    if cfg.plant == "uav_full":
        trace = simulate_uav(built.uav, {c.name: c for c in built.channels}, cfg.dt, cfg.t_end,
                             cfg.integrator, cfg.record_every, meta)
    else:
        trace = simulate_abstract(built.channels, cfg.dt, cfg.t_end, cfg.integrator, cfg.record_every, meta)
    trace.events["certificates"] = {k: v.passed for k, v in built.certificates.items()}
    trace.events["t_s"] = {ch: detect_sliding(trace, ch)["t_s"] for ch in trace.channels
                           if f"{ch}.sigma_tilde" in trace}
    return trace
