"""Loading scenario files and the presets shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .sim.scenario import ConfigError


def list_presets() -> list[str]:
    root = resources.files("dsscsim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    path = resources.files("dsscsim") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError("", f"unknown preset {name!r} (available: {', '.join(list_presets())})")
    return path.read_text()


def load_config(ref) -> tuple[dict, str]:
    """Parse a scenario from a file path or a preset name; returns ``(mapping, source)``."""
    p = Path(ref)
    if p.is_file():
        text, source = p.read_text(), str(p.resolve())
    elif p.suffix in (".yaml", ".yml") or p.parent != Path("."):
        raise ConfigError("", f"config file not found: {ref}")
    else:
        text, source = preset_text(str(ref)), f"preset:{ref}"
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse {source}: {exc}") from None
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError("", f"{source}: top level must be a mapping")
    return cfg, source


def load_preset(name: str) -> dict:
    return load_config(name)[0]
