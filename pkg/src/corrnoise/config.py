"""JSON scenario configuration: schema, loading and conversion to domain objects."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import jsonschema

from .errors import ParameterError
from .noise import AlphaDensity, NoiseBudget, NoiseSpec
from .templates import CorrelationTemplate, GroupSpec, Kind

SCHEMA_VERSION = 1

ARTIFACTS = ("matrix", "validity", "diff_histogram", "spectra", "cluster_summary")

_number = {"type": "number"}
_group = {
    "type": "object",
    "additionalProperties": False,
    "required": ["size"],
    "properties": {
        "size": {"type": "integer", "minimum": 1},
        "rho": _number,
        "tau": {"type": "number", "minimum": 0},
        "rho_max": _number,
        "rho_min": _number,
        "gamma": {"type": "number", "exclusiveMinimum": 0},
    },
}
_template = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "groups"],
    "properties": {
        "kind": {"enum": [k.value for k in Kind]},
        "groups": {"type": "array", "minItems": 1, "items": _group},
        "delta": {"type": "number", "minimum": 0},
    },
}
_density = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["abs", "arc", "beta"]},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "b": {"type": "number", "exclusiveMinimum": 0},
    },
}
_noise = {
    "type": "object",
    "additionalProperties": False,
    "required": ["m"],
    "properties": {
        "epsilon": {"type": "number", "minimum": 0},
        "m": {"type": "integer", "minimum": 2},
        "generator": {"enum": ["sphere", "iid", "alpha"]},
        "density": _density,
    },
}
_method_arm = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "m", "epsilon"],
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "m": {"type": "integer", "minimum": 2},
        "epsilon": {"type": "number", "minimum": 0},
        "generator": {"enum": ["sphere", "iid", "alpha"]},
        "density": _density,
    },
}
_gaussian_arm = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "sample_size"],
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "sample_size": {"type": "integer", "minimum": 2},
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "replicates": {"type": "integer", "minimum": 1},
        "template": _template,
        "noise": _noise,
        "budget": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kappa_max"],
            "properties": {"kappa_max": {"type": "number", "exclusiveMinimum": 1}},
        },
        "outputs": {"type": "array", "items": {"enum": list(ARTIFACTS)}, "uniqueItems": True},
        "method_arms": {"type": "array", "items": _method_arm},
        "gaussian_arms": {"type": "array", "items": _gaussian_arm},
        "spectrum_pairs": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        },
        "bins": {"type": "integer", "minimum": 1},
        "range": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "scenario": {"type": "string"},
        "k_max": {"type": "integer", "minimum": 2},
    },
}


class ConfigError(ParameterError):
    """Malformed or invalid configuration file."""


@dataclass
class ScenarioConfig:
    raw: dict
    template: Optional[CorrelationTemplate] = None
    noise: Optional[NoiseSpec] = None
    budget: Optional[NoiseBudget] = None
    replicates: int = 1
    seed: int = 0
    outputs: list[str] = field(default_factory=lambda: ["matrix"])

    def get(self, key: str, default: Any = None) -> Any:
        return self.raw.get(key, default)


def parse_group(kind: Kind, g: dict) -> GroupSpec:
    if "rho_max" in g or "rho_min" in g:
        if kind is not Kind.HUB:
            raise ConfigError("rho_max/rho_min are only valid for hub groups")
        if "rho" in g or "tau" in g or not ("rho_max" in g and "rho_min" in g):
            raise ConfigError("hub group needs either (rho, tau) or (rho_max, rho_min)")
        return GroupSpec.hub(g["size"], g["rho_max"], g["rho_min"], g.get("gamma", 1.0))
    if "rho" not in g:
        raise ConfigError("group needs rho")
    if kind is not Kind.HUB and ("tau" in g or "gamma" in g):
        raise ConfigError("tau/gamma are only valid for hub groups")
    return GroupSpec(kind, g["size"], g["rho"], g.get("tau", 0.0), g.get("gamma", 1.0))


def parse_template(d: dict) -> CorrelationTemplate:
    kind = Kind(d["kind"])
    groups = tuple(parse_group(kind, g) for g in d["groups"])
    return CorrelationTemplate(groups, d.get("delta", 0.0))


def parse_noise(d: dict, seed: int, epsilon: Optional[float] = None) -> NoiseSpec:
    eps = d.get("epsilon", epsilon)
    if eps is None:
        raise ConfigError("noise.epsilon is required unless a budget supplies it")
    density = AlphaDensity(**d["density"]) if "density" in d else None
    return NoiseSpec(eps, d["m"], d.get("generator", "sphere"), density, seed)


def load_config(path, seed: Optional[int] = None, replicates: Optional[int] = None) -> ScenarioConfig:
    """Read, schema-check and convert a config file; CLI overrides win."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(raw, seed, replicates)


def config_from_dict(raw: dict, seed: Optional[int] = None, replicates: Optional[int] = None) -> ScenarioConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    cfg = ScenarioConfig(raw=raw)
    cfg.seed = raw.get("seed", 0) if seed is None else seed
    cfg.replicates = raw.get("replicates", 1) if replicates is None else replicates
    if cfg.replicates < 1:
        raise ConfigError("replicates must be >= 1")
    cfg.outputs = list(raw.get("outputs", ["matrix"]))
    try:
        if "template" in raw:
            cfg.template = parse_template(raw["template"])
        if "budget" in raw:
            cfg.budget = NoiseBudget(raw["budget"]["kappa_max"])
        if "noise" in raw:
            # with a budget and no explicit epsilon, the CLI fills epsilon in later
            placeholder = 0.0 if cfg.budget is not None else None
            cfg.noise = parse_noise(raw["noise"], cfg.seed, placeholder)
    except ConfigError:
        raise
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
