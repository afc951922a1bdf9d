"""Scenario files: TOML parsing, override handling, run manifests.

A scenario is a TOML document with the sections [network], [mobility],
[access], [replication], [demand.phase.N] and [output]. Unknown sections
or keys are rejected by name. Bundled scenarios ship as package data and
can be addressed by bare name from the CLI.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import fields
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .config import (
    AccessConfig,
    ConfigError,
    DemandPhase,
    MobilityConfig,
    NetworkConfig,
    OutputConfig,
    ReplicationConfig,
    SimConfig,
)

_SECTION_TYPES = {
    "network": NetworkConfig,
    "mobility": MobilityConfig,
    "access": AccessConfig,
    "replication": ReplicationConfig,
    "output": OutputConfig,
}

def _coerce(value, current):
    """Nudge TOML values toward the config field's shape."""
    if isinstance(value, list):
        return tuple(float(v) for v in value)
    if isinstance(current, bool):
        return value  # bool check happens in the caller
    if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def _apply_section(obj, section: str, data: dict) -> None:
    known = {f.name for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}")
        current = getattr(obj, key)
        value = _coerce(value, current)
        if isinstance(current, bool) and not isinstance(value, bool):
            raise ConfigError(f"{section}.{key} must be a boolean")
        setattr(obj, key, value)


def _parse_phases(data: dict) -> list[DemandPhase]:
    phase_tbl = data.get("phase")
    if phase_tbl is None or not isinstance(phase_tbl, dict):
        raise ConfigError("demand section must contain [demand.phase.N] tables")
    extra = [k for k in data if k != "phase"]
    if extra:
        raise ConfigError(f"unknown key demand.{extra[0]}")
    phases = []
    try:
        order = sorted(phase_tbl, key=int)
    except ValueError:
        raise ConfigError("demand.phase tables must be numbered")
    for name in order:
        ph = DemandPhase()
        body = phase_tbl[name]
        known = {f.name for f in fields(DemandPhase)}
        for key, value in body.items():
            if key not in known:
                raise ConfigError(f"unknown key demand.phase.{name}.{key}")
            if key == "region":
                value = tuple(float(v) for v in value)
            elif isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            setattr(ph, key, value)
        phases.append(ph)
    return phases


def config_from_toml(text: str) -> SimConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scenario is not valid TOML: {exc}") from exc
    cfg = SimConfig()
    for section, body in data.items():
        if section in _SECTION_TYPES:
            _apply_section(getattr(cfg, section), section, body)
        elif section == "demand":
            cfg.phases = _parse_phases(body)
        else:
            raise ConfigError(f"unknown section [{section}]")
    cfg.validate()
    return cfg


def load_scenario(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_toml(fh.read())


def _parse_override_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw  # bare strings ("flood") come through unquoted


def apply_overrides(cfg: SimConfig, overrides) -> None:
    """Apply `section.key=value` strings in place, then revalidate."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        parts = path.strip().split(".")
        value = _parse_override_value(raw.strip())
        if len(parts) == 2 and parts[0] in _SECTION_TYPES:
            section, key = parts
            _apply_section(getattr(cfg, section), section, {key: value})
        elif len(parts) == 4 and parts[0] == "demand" and parts[1] == "phase":
            try:
                idx = int(parts[2]) - 1
            except ValueError:
                raise ConfigError(f"override {item!r}: phase index must be a number")
            if not 0 <= idx < len(cfg.phases):
                raise ConfigError(f"override {item!r}: no such demand phase")
            key = parts[3]
            if key not in {f.name for f in fields(DemandPhase)}:
                raise ConfigError(f"unknown key demand.phase.{parts[2]}.{key}")
            if key == "region":
                value = tuple(float(v) for v in value)
            elif isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            setattr(cfg.phases[idx], key, value)
        else:
            raise ConfigError(f"override {item!r} does not name a known config key")
    cfg.validate()


def config_hash(cfg: SimConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def build_manifest(cfg: SimConfig, seeds, overrides, scenario_name: str | None) -> dict:
    from . import __version__

    return {
        "scenario": scenario_name,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "seeds": list(seeds),
        "overrides": list(overrides),
        "version": __version__,
    }


def bundled_scenarios() -> dict[str, str]:
    """Name -> first-line description of every scenario shipped in the package."""
    out = {}
    for entry in resources.files("replisim.scenarios").iterdir():
        if entry.name.endswith(".toml"):
            first = entry.read_text(encoding="utf-8").splitlines()[0].lstrip("# ").strip()
            out[entry.name[: -len(".toml")]] = first
    return dict(sorted(out.items()))


def bundled_scenario_text(name: str) -> str:
    entry = resources.files("replisim.scenarios") / f"{name}.toml"
    if not entry.is_file():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return entry.read_text(encoding="utf-8")
