"""Command-line front end: ``dsscsim run | batch | certify | compare | presets``.

Exit codes: 0 ok, 1 invalid configuration, 2 integration failure,
3 certification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import list_presets, load_config, preset_text
from .controller_zoo import synthesized_equivalence_report
from .plant import IntegrationError
from .sim.metrics import compute_metrics
from .sim.scenario import CertificationError, ConfigError, build, integrate, metric_windows, validate

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_CERT = 0, 1, 2, 3

# keys of the trace meta that vary between identical runs
_VOLATILE = ("wall_time",)


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _overrides(args) -> dict:
    return {"dt": args.dt, "t_end": args.t_end}


def _dump(obj, path: Path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=float) + "\n")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _warn_list(caught):
    return [f"{w.category.__name__}: {w.message}" for w in caught]


def _simulate(ref, overrides, allow):
    """Load, validate and integrate; returns ``(cfg, source, trace, warnings)``."""
    raw, source = load_config(ref)
    cfg = validate(raw, overrides)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        trace = integrate(cfg, allow_uncertified=allow or None)
    return cfg, source, trace, _warn_list(caught)


def _metrics_doc(cfg, trace, warns):
    m = compute_metrics(trace, metric_windows(cfg.raw))
    meta = {k: v for k, v in trace.meta.items() if k not in _VOLATILE}
    events = {k: v for k, v in trace.events.items() if k != "final_state"}
    return {"config_hash": cfg.hash, "meta": meta, "events": events, "metrics": m.to_dict()["channels"],
            "warnings": warns}


def run_one(ref, out: Path, overrides=None, allow=False, subcommand="run") -> tuple[int, dict]:
    """Run one scenario into ``out``; returns ``(exit code, summary)``."""
    started = _now()
    summary = {"config": str(ref)}
    try:
        cfg, source, trace, warns = _simulate(ref, overrides or {}, allow)
    except ConfigError as exc:
        return EXIT_CONFIG, {**summary, "error": str(exc)}
    except CertificationError as exc:
        return EXIT_CERT, {**summary, "error": str(exc)}
    except (IntegrationError, FloatingPointError, OverflowError) as exc:
        return EXIT_INTEGRATION, {**summary, "error": f"integration aborted: {exc}"}
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    doc = _metrics_doc(cfg, trace, warns)
    _dump(doc, out / "metrics.json")
    _dump({"subcommand": subcommand, "config": source, "config_hash": cfg.hash, "out_dir": str(out.resolve()),
           "files": ["trace.csv", "metrics.json"], "version": __version__, "started": started,
           "finished": _now()}, out / "manifest.json")
    summary.update(config_hash=cfg.hash, name=cfg.name, out=str(out), warnings=warns,
                   rms_e={ch: m["rms_e"]["all"] for ch, m in doc["metrics"].items()})
    return EXIT_OK, summary


def cmd_run(args) -> int:
    code, s = run_one(args.config[0], Path(args.out), _overrides(args), args.allow_uncertified)
    if code:
        _err(s["error"])
        return code
    for w in s["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{s['name']} [{s['config_hash']}] -> {s['out']}")
    for ch, v in s["rms_e"].items():
        print(f"  {ch}: rms|e| = {v:.6g}")
    return EXIT_OK


def _batch_worker(job):
    ref, out, overrides, allow = job
    return run_one(ref, Path(out), overrides, allow, "batch")


def cmd_batch(args) -> int:
    root = Path(args.out)
    jobs = [(ref, str(root / f"{i:03d}_{Path(ref).stem}"), _overrides(args), args.allow_uncertified)
            for i, ref in enumerate(args.config)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_batch_worker, jobs))
    else:
        results = [_batch_worker(j) for j in jobs]
    worst = EXIT_OK
    for (ref, out, *_), (code, s) in zip(jobs, results):
        worst = max(worst, code)
        status = "ok" if code == 0 else f"exit {code}: {s['error']}"
        print(f"{ref}: {status}")
    root.mkdir(parents=True, exist_ok=True)
    _dump({"subcommand": "batch", "version": __version__, "runs": [
        {"config": ref, "out_dir": out, "exit_code": code, "config_hash": s.get("config_hash")}
        for (ref, out, *_), (code, s) in zip(jobs, results)]}, root / "batch.json")
    return worst


def _certificate_doc(cert):
    d = cert.to_dict()
    sg = d["small_gain"]
    sg["status"] = "zero dynamics present" if sg["has_zero_dynamics"] else "no zero dynamics, e-loop bound only"
    return d


def cmd_certify(args) -> int:
    try:
        raw, source = load_config(args.config[0])
        cfg = validate(raw, _overrides(args))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            built = build(cfg, certify_only=True)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if not built.certificates:
        _err("no channel uses designed gains (table1_vgsta or vgsta_approx); nothing to certify")
        return EXIT_CONFIG
    docs = {ch: _certificate_doc(c) for ch, c in built.certificates.items()}
    passed = all(c.passed for c in built.certificates.values())
    for ch, c in built.certificates.items():
        sg = docs[ch]["small_gain"]
        print(f"{ch}: {'PASS' if c.passed else 'FAIL'}  q_min_eig={c.q_positivity.min_eigenvalue:.4g}  "
              f"small-gain {sg['status']} margin={sg['margin']:.4g}")
        for name in c.failed:
            print(f"  violated: {name}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump({"config_hash": cfg.hash, "passed": passed, "channels": docs}, out / "certificate.json")
        _dump({"subcommand": "certify", "config": source, "config_hash": cfg.hash,
               "out_dir": str(out.resolve()), "files": ["certificate.json"], "version": __version__,
               "started": _now(), "finished": _now()}, out / "manifest.json")
    return EXIT_OK if passed else EXIT_CERT


def compatible(a: dict, b: dict) -> str | None:
    """Reason why two scenarios cannot be compared, or ``None``."""
    for k in ("plant", "dt", "t_end", "integrator", "uav"):
        if a.get(k) != b.get(k):
            return f"{k} differs"
    if set(a["channels"]) != set(b["channels"]):
        return "channel sets differ"
    for name in a["channels"]:
        ca = {k: v for k, v in (a["channels"][name] or {}).items() if k != "controller"}
        cb = {k: v for k, v in (b["channels"][name] or {}).items() if k != "controller"}
        if ca != cb:
            return f"channel {name}: plant, trajectory or disturbance setup differs"
    return None


def compare_traces(ta, tb, window=None) -> dict:
    out = {}
    ma, mb = compute_metrics(ta).channels, compute_metrics(tb).channels
    for ch in ta.channels:
        t_s = ta.events.get("t_s", {}).get(ch)
        if t_s is None:
            t_s = tb.events.get("t_s", {}).get(ch)
        first, second = (ta, tb) if f"{ch}.k_o" in ta or f"{ch}.k_o" not in tb else (tb, ta)
        rep = synthesized_equivalence_report(first, second, ch, t_s=t_s or 0.0, window=window)
        out[ch] = {"equivalence": rep.to_dict(),
                   "A": {"rms_e": ma[ch].rms_e["all"], "sup_e": ma[ch].sup_e["all"],
                         "residual": ma[ch].residual, "chattering": ma[ch].chattering},
                   "B": {"rms_e": mb[ch].rms_e["all"], "sup_e": mb[ch].sup_e["all"],
                         "residual": mb[ch].residual, "chattering": mb[ch].chattering}}
    return out


def cmd_compare(args) -> int:
    if len(args.config) != 2:
        _err("compare needs exactly two --config values")
        return EXIT_CONFIG
    try:
        (ra, sa), (rb, sb) = load_config(args.config[0]), load_config(args.config[1])
        ov = _overrides(args)
        ca, cb = validate(ra, ov), validate(rb, ov)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    why = compatible(ca.raw, cb.raw)
    if why:
        _err(f"incompatible configs: {why}")
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ta = integrate(ca, allow_uncertified=args.allow_uncertified or None)
            tb = integrate(cb, allow_uncertified=args.allow_uncertified or None)
    except CertificationError as exc:
        _err(str(exc))
        return EXIT_CERT
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except IntegrationError as exc:
        _err(f"integration aborted: {exc}")
        return EXIT_INTEGRATION
    window = tuple(args.window) if args.window else None
    report = compare_traces(ta, tb, window)
    print(f"A = {sa} [{ca.hash}]\nB = {sb} [{cb.hash}]")
    print(f"{'channel':8} {'sup|dsigma|':>12} {'rms|dsigma|':>12} {'sup|du|':>10} "
          f"{'rms|e| A':>10} {'rms|e| B':>10} {'TV(u_p) A':>10} {'TV(u_p) B':>10}")
    for ch, r in report.items():
        eq = r["equivalence"]
        print(f"{ch:8} {eq['sigma_sup']:12.4g} {eq['sigma_rms']:12.4g} {eq['u_sup']:10.4g} "
              f"{r['A']['rms_e']:10.4g} {r['B']['rms_e']:10.4g} "
              f"{r['A']['chattering']['all:u_p']:10.4g} {r['B']['chattering']['all:u_p']:10.4g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump({"config_hash": [ca.hash, cb.hash], "window": window, "channels": report}, out / "compare.json")
        _dump({"subcommand": "compare", "config": [sa, sb], "config_hash": [ca.hash, cb.hash],
               "out_dir": str(out.resolve()), "files": ["compare.json"], "version": __version__,
               "started": _now(), "finished": _now()}, out / "manifest.json")
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.show:
        try:
            sys.stdout.write(preset_text(args.show))
        except ConfigError as exc:
            _err(str(exc))
            return EXIT_CONFIG
        return EXIT_OK
    for name in list_presets():
        print(name)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dsscsim", description="Dynamic smooth sliding control simulator.")
    p.add_argument("--version", action="version", version=f"dsscsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, multi=False, out_required=False):
        sp.add_argument("--config", action="append", required=True,
                        help="scenario file or preset name" + (" (repeatable)" if multi else ""))
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--dt", type=float, help="override the step size")
        sp.add_argument("--t-end", type=float, help="override the final time")
        sp.add_argument("--allow-uncertified", action="store_true",
                        help="run even when the gain certificate fails")

    sp = sub.add_parser("run", help="integrate one scenario")
    common(sp, out_required=True)
    sp.set_defaults(fn=cmd_run)
    sp = sub.add_parser("batch", help="integrate several scenarios in parallel")
    common(sp, multi=True, out_required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_batch)
    sp = sub.add_parser("certify", help="design and certify gains")
    common(sp)
    sp.set_defaults(fn=cmd_certify)
    sp = sub.add_parser("compare", help="divergence between two runs on the same plant")
    common(sp, multi=True)
    sp.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"))
    sp.set_defaults(fn=cmd_compare)
    sp = sub.add_parser("presets", help="list or print shipped presets")
    sp.add_argument("--show", metavar="NAME")
    sp.set_defaults(fn=cmd_presets)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        _err("--workers must be at least 1")
        return EXIT_CONFIG
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
