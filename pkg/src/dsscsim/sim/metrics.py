"""Sliding-onset detection and summary metrics of a trace."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .trace import SimTrace


def sliding_band(trace: SimTrace, channel: str, eps_s: float | None = None) -> np.ndarray:
    """Pointwise band; default ``10 dt k_o rho``, the per-step reach of the injection."""
    n = len(trace)
    if eps_s is not None:
        return np.full(n, float(eps_s))
    dt = trace.meta["dt"]
    return 10.0 * dt * np.abs(trace[f"{channel}.k_o"] * trace[f"{channel}.rho"])


def detect_sliding(trace: SimTrace, channel: str, eps_s: float | None = None, confirm: int = 50,
                   delta_rho: float | None = None) -> dict:
    """First time after which ``|sigma_tilde|`` stays inside the band for ``confirm`` steps.

    Also reports whether the band is kept until the end of the run and, when
    ``delta_rho`` is given, the reaching-time bound ``|sigma_tilde(0)|/delta_rho``.
    """
    key = f"{channel}.sigma_tilde"
    if key not in trace:
        raise ValueError(f"channel {channel!r} has no predictor error; sliding detection needs a DSSC")
    st = np.abs(trace[key])
    band = sliding_band(trace, channel, eps_s)
    inside = st < band
    t = trace.t
    n = len(t)
    # run-length of consecutive inside samples, looking forward
    run = np.zeros(n + 1, dtype=int)
    for i in range(n - 1, -1, -1):
        run[i] = run[i + 1] + 1 if inside[i] else 0
    need = min(confirm, n)
    hits = np.nonzero(run[:n] >= need)[0]
    out = {"channel": channel, "t_s": None, "stays_inside": False, "escape_steps": 0}
    if hits.size:
        i0 = int(hits[0])
        out["t_s"] = float(t[i0])
        tail = inside[i0:]
        out["stays_inside"] = bool(tail.all())
        out["escape_steps"] = int((~tail).sum())
    if delta_rho:
        bound = float(st[0]) / delta_rho
        out["T_s_bound"] = bound
        if out["t_s"] is not None:
            out["bound_margin"] = bound - out["t_s"]
    return out


def total_variation_rate(u: np.ndarray, t: np.ndarray) -> float:
    if len(u) < 2:
        return 0.0
    span = t[-1] - t[0]
    return float(np.sum(np.abs(np.diff(u))) / span) if span > 0 else 0.0


@dataclass
class ChannelMetrics:
    t_s: float | None
    rms_e: dict
    sup_e: dict
    residual: float
    chattering: dict
    clamp_count: int = 0
    extra: dict = field(default_factory=dict)


@dataclass
class Metrics:
    channels: dict
    config_hash: str = ""

    def to_dict(self):
        return {"config_hash": self.config_hash,
                "channels": {k: asdict(v) for k, v in self.channels.items()}}


def compute_metrics(trace: SimTrace, windows: dict | None = None, eps_s: float | None = None) -> Metrics:
    """Per-channel error and smoothness summaries.

    ``windows`` maps names to ``(t0, t1)``; ``all`` covers the full run. The
    residual is ``sup|e|`` over the final 20 % of the run. The chattering
    index is the total variation per second of the commanded control
    ``u_cmd`` (controller output plus nominal part), with ``u`` and ``u_p``
    variants alongside.
    """
    t = trace.t
    tend = float(t[-1])
    wins = {"all": (float(t[0]), tend)}
    for name, (a, b) in (windows or {}).items():
        if a < t[0] - 1e-9 or b > tend + 1e-9 or b <= a:
            raise ValueError(f"window {name!r}=({a}, {b}) outside the trace grid")
        wins[name] = (a, b)
    tail = trace.window(0.8 * tend, tend)
    out = {}
    stats = trace.events.get("controller_stats", {})
    for ch in trace.channels:
        e = trace[f"{ch}.e"]
        rms, sup, chat = {}, {}, {}
        for name, (a, b) in wins.items():
            m = trace.window(a, b)
            rms[name] = float(np.sqrt(np.mean(e[m] ** 2)))
            sup[name] = float(np.max(np.abs(e[m])))
            chat[name] = total_variation_rate(trace[f"{ch}.u_cmd"][m], t[m])
            chat[name + ":u"] = total_variation_rate(trace[f"{ch}.u"][m], t[m])
            chat[name + ":u_p"] = total_variation_rate(trace[f"{ch}.u_p"][m], t[m])
        ts = None
        if f"{ch}.sigma_tilde" in trace:
            ts = detect_sliding(trace, ch, eps_s)["t_s"]
        out[ch] = ChannelMetrics(
            t_s=ts, rms_e=rms, sup_e=sup, residual=float(np.max(np.abs(e[tail]))), chattering=chat,
            clamp_count=int(stats.get(ch, {}).get("clamp_count", 0)),
        )
        for v in list(rms.values()) + list(sup.values()):
            if not math.isfinite(v):
                raise ValueError(f"non-finite metric on channel {ch}")
    return Metrics(out, trace.meta.get("config_hash", ""))
