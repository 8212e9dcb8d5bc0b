"""JSON configuration files: defaults, validation and serialization.

A config document has optional sections ``simulation``, ``population``,
``network``, ``disease``, ``partnerships``, ``transmission`` and
``scenarios``.  Anything omitted keeps its default; unknown keys are errors.
Distributions are written as lists, e.g. ``"duration": ["DU", 1, 2]``.
"""
from __future__ import annotations

import dataclasses
import json
import re
from enum import Enum
from pathlib import Path
from typing import Any

from .disease import TherapyMode
from .engine import SimulationConfig, apply_overrides
from .errors import ConfigError, ParameterError
from .stochastics import DistributionSpec
from .transmission import PRESETS, PerActBase, ScenarioSpec, preset

SECTIONS = ("population", "network", "disease", "partnerships", "transmission")
SIMULATION_KEYS = ("start_year", "end_year", "realizations", "seed")
SCENARIO_NAME = re.compile(r"^[A-Za-z0-9_-]+$")

_PROBABILITIES = {
    "population.initial_diagnosed", "network.p_zero", "disease.p_diag", "disease.p_success",
    "partnerships.p_form", "partnerships.receptive_share",
}
_POSITIVE = {"network.gamma", "transmission.agreement", "transmission.susceptibility"}
_AT_LEAST = {"population.n": 2, "network.k_max": 1, "population.initial_infected": 0,
             "simulation.realizations": 1}


def _check_range(key: str, value) -> None:
    if key in _PROBABILITIES and not 0.0 <= value <= 1.0:
        raise ConfigError(f"probability must lie in [0, 1], got {value}", key=key)
    if key in _POSITIVE and not value > 0:
        raise ConfigError(f"must be positive, got {value}", key=key)
    if key in _AT_LEAST and value < _AT_LEAST[key]:
        raise ConfigError(f"must be at least {_AT_LEAST[key]}, got {value}", key=key)
    if key == "simulation.seed" and not 0 <= value < 2**64:
        raise ConfigError("must be a 64-bit unsigned integer", key=key)


def _coerce(key: str, default, value):
    if isinstance(default, DistributionSpec):
        try:
            return DistributionSpec.parse(value)
        except ParameterError as exc:
            raise ConfigError(str(exc), key=key) from None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key=key)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key=key)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key=key)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key=key)
        return value
    if isinstance(default, PerActBase):
        values = _section(key, default, value)
        try:
            return PerActBase(**values)
        except ParameterError as exc:
            raise ConfigError(str(exc), key=key) from None
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError("expected an object", key=key)
        try:
            return {int(y): float(r) for y, r in value.items()}
        except (TypeError, ValueError):
            raise ConfigError("expected {year: number} entries", key=key) from None
    raise ConfigError(f"unsupported value {value!r}", key=key)


def _section(name: str, current, data, section: str = None) -> dict:
    """Validated values of one section; ``section`` names it for range checks."""
    if not isinstance(data, dict):
        raise ConfigError("section must be an object", key=name)
    known = {f.name: getattr(current, f.name) for f in dataclasses.fields(current)}
    out = {}
    for key, value in data.items():
        path = f"{name}.{key}"
        if key not in known:
            raise ConfigError("unknown key", key=path)
        out[key] = _coerce(path, known[key], value)
        if not isinstance(out[key], (dict, DistributionSpec, PerActBase)):
            try:
                _check_range(f"{section or name}.{key}", out[key])
            except ConfigError as exc:
                raise ConfigError(exc.message, key=path) from None
    return out


def _scenario(name: str, data: dict) -> ScenarioSpec:
    key = f"scenarios.{name}"
    if not SCENARIO_NAME.match(name):
        raise ConfigError("scenario names may only use letters, digits, '-' and '_'", key=key)
    if not isinstance(data, dict):
        raise ConfigError("scenario must be an object", key=key)
    base = preset(name) if name.lower() in PRESETS else ScenarioSpec(name)
    fields = {f.name for f in dataclasses.fields(ScenarioSpec)} - {"name"}
    values = {}
    for k, v in data.items():
        if k not in fields:
            raise ConfigError("unknown key", key=f"{key}.{k}")
        if k == "overrides":
            if not isinstance(v, dict):
                raise ConfigError("expected an object", key=f"{key}.overrides")
            defaults = SimulationConfig()
            values[k] = {}
            for sec, body in v.items():
                if sec not in SECTIONS:
                    raise ConfigError("unknown section", key=f"{key}.overrides.{sec}")
                values[k][sec] = _section(f"{key}.overrides.{sec}", getattr(defaults, sec), body, sec)
        elif k in ("therapy", "baseline_therapy"):
            try:
                values[k] = TherapyMode(v)
            except ValueError:
                raise ConfigError("must be 'moderate' or 'optimistic'", key=f"{key}.{k}") from None
        else:
            values[k] = _coerce(f"{key}.{k}", getattr(base, k), v)
    try:
        return dataclasses.replace(base, **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key=key) from None


def config_from_dict(doc: dict) -> tuple[SimulationConfig, dict[str, ScenarioSpec]]:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    unknown = set(doc) - set(SECTIONS) - {"simulation", "scenarios"}
    if unknown:
        raise ConfigError("unknown section", key=sorted(unknown)[0])
    config = SimulationConfig()
    changes = {sec: _section(sec, getattr(config, sec), doc[sec]) for sec in SECTIONS if sec in doc}
    config = apply_overrides(config, changes)
    sim = doc.get("simulation", {})
    if not isinstance(sim, dict):
        raise ConfigError("section must be an object", key="simulation")
    sim_values = {}
    for key, value in sim.items():
        if key not in SIMULATION_KEYS:
            raise ConfigError("unknown key", key=f"simulation.{key}")
        sim_values[key] = _coerce(f"simulation.{key}", 0, value)
        _check_range(f"simulation.{key}", sim_values[key])
    config = config.replace(**sim_values)
    if config.population.initial_infected > config.population.n:
        raise ConfigError("cannot exceed population size", key="population.initial_infected")

    scenarios = {name: preset(name) for name in PRESETS}
    body = doc.get("scenarios", {})
    if not isinstance(body, dict):
        raise ConfigError("section must be an object", key="scenarios")
    for name, data in body.items():
        scenarios[name] = _scenario(name, data)
    return config, scenarios


def parse_config(path) -> tuple[SimulationConfig, dict[str, ScenarioSpec]]:
    """Read a JSON config; an empty file yields every default."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror or exc}", key=str(path)) from None
    if not text.strip():
        return config_from_dict({})
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          key=str(path)) from None
    return config_from_dict(doc)


def to_jsonable(value: Any):
    if isinstance(value, DistributionSpec):
        return value.to_list()
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def config_to_dict(config: SimulationConfig) -> dict:
    doc = {"simulation": {k: getattr(config, k) for k in SIMULATION_KEYS}}
    for sec in SECTIONS:
        doc[sec] = to_jsonable(getattr(config, sec))
    return doc


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    doc = to_jsonable(spec)
    doc.pop("name")
    return doc


def presets_document() -> dict:
    return {"scenarios": {name: scenario_to_dict(spec) for name, spec in PRESETS.items()}}
