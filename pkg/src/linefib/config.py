"""JSON model configurations.

A configuration names a generator with its parameters, optional solver
settings and an optional scale (the contraction ``V(c x)``)::

    {"schema_version": 1,
     "generator": {"name": "Composed",
                   "f": {"name": "ConvexCollapse",
                         "body": {"shape": "ellipse", "center": [0, 0],
                                  "semi_axes": [1.5, 0.5], "angle": 0.3}}},
     "solver": {"newton_tol": 1e-12},
     "scale": 1.0}

Generator entries use the same keys as ``GeneratorSpec.to_dict``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .evaluator import FibrationModel, SolverSettings
from .generators import (
    Composed, Constant, ConvexCollapse, DiskCollapse, ExoticTan, FatHelicoid, HalfHalf, Hopf,
    Identity, OneParam, SmoothDiskCollapse,
)

SCHEMA_VERSION = 1

_num = {"type": "number"}
_vec2 = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}


def _entry(name, props=None, required=()):
    props = dict(props or {})
    props["name"] = {"const": name}
    return {"if": {"properties": {"name": {"const": name}}, "required": ["name"]},
            "then": {"type": "object", "properties": props, "required": ["name", *required],
                     "additionalProperties": False}}


_ELLIPSE = {"type": "object", "additionalProperties": False,
            "required": ["shape", "semi_axes"],
            "properties": {"shape": {"const": "ellipse"}, "center": _vec2,
                           "semi_axes": _vec2, "angle": _num}}
_POLYGON = {"type": "object", "additionalProperties": False,
            "required": ["shape", "vertices"],
            "properties": {"shape": {"const": "polygon"},
                           "vertices": {"type": "array", "items": _vec2, "minItems": 3},
                           "rounding": {"type": "number", "exclusiveMinimum": 0}}}

F_NAMES = ("DiskCollapse", "SmoothDiskCollapse", "HalfHalf", "FatHelicoid", "ConvexCollapse")
F_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {"name": {"enum": list(F_NAMES)}},
    "allOf": [_entry(n) for n in F_NAMES[:4]]
    + [_entry("ConvexCollapse", {"body": {"oneOf": [_ELLIPSE, _POLYGON]}}, ["body"])],
}

GENERATOR_NAMES = ("Hopf", "ExoticTan", "OneParam", "Constant", "Composed", "Identity")
GENERATOR_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {"name": {"enum": list(GENERATOR_NAMES)}},
    "allOf": [
        _entry("Hopf", {"sign": {"enum": [1, -1]}}),
        _entry("ExoticTan"),
        _entry("Identity"),
        _entry("Constant", {"u": _vec3}, ["u"]),
        _entry("Composed", {"f": F_SCHEMA}, ["f"]),
        _entry("OneParam", {"slope": _num, "offset": _num,
                            "breakpoints": {"type": "array", "items": _num, "minItems": 2},
                            "angles": {"type": "array", "items": _num, "minItems": 2}}),
        {"if": {"required": ["breakpoints"]}, "then": {"required": ["angles"],
                                                       "not": {"required": ["slope"]}}},
        {"if": {"required": ["angles"]}, "then": {"required": ["breakpoints"]}},
    ],
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "linefib model configuration",
    "type": "object",
    "required": ["schema_version", "generator"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "generator": GENERATOR_SCHEMA,
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "newton_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1e-6},
                "max_newton_iters": {"type": "integer", "minimum": 1},
                "continuation_steps": {"type": "integer", "minimum": 1},
                "fd_step": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "scale": {"type": "number", "minimum": 0, "maximum": 1},
        "description": {"type": "string"},
    },
}


def _build_f(d):
    name = d["name"]
    if name == "ConvexCollapse":
        body = d["body"]
        if body["shape"] == "ellipse":
            return ConvexCollapse.ellipse(body.get("center", (0.0, 0.0)), body["semi_axes"],
                                          body.get("angle", 0.0))
        if "rounding" in body:
            return ConvexCollapse.polygon(body["vertices"], body["rounding"])
        return ConvexCollapse.polygon(body["vertices"])
    return {"DiskCollapse": DiskCollapse, "SmoothDiskCollapse": SmoothDiskCollapse,
            "HalfHalf": HalfHalf, "FatHelicoid": FatHelicoid}[name]()


def build_generator(d):
    """Generator spec from a validated ``generator`` entry."""
    name = d["name"]
    if name == "Hopf":
        return Hopf(d.get("sign", 1))
    if name == "ExoticTan":
        return ExoticTan()
    if name == "Identity":
        return Identity()
    if name == "Constant":
        return Constant(d["u"])
    if name == "Composed":
        return Composed(_build_f(d["f"]))
    if "breakpoints" in d:
        return OneParam(breakpoints=d["breakpoints"], angles=d["angles"])
    return OneParam(d.get("slope", 1.0), d.get("offset", 0.0))


@dataclass(frozen=True)
class ModelConfig:
    """A validated configuration and the model it describes."""

    data: dict
    model: FibrationModel

    def echo(self):
        """The configuration as given (enough to rebuild the same model)."""
        return copy.deepcopy(self.data)


def _read(source):
    if isinstance(source, dict):
        return copy.deepcopy(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def load_config(source) -> ModelConfig:
    """Validate a configuration (path or dict) and build its model.

    Raises :class:`ConfigError` on schema violations and on parameter values
    the generator rejects.
    """
    data = _read(source)
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {e.message}")
    try:
        spec = build_generator(data["generator"])
        settings = SolverSettings(**data.get("solver", {}))
        model = FibrationModel(spec, settings, float(data.get("scale", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"config generator: {exc}") from exc
    return ModelConfig(data, model)


def config_for(spec, **extra) -> dict:
    """Configuration dict for a generator spec instance."""
    d = {"schema_version": SCHEMA_VERSION, "generator": spec.to_dict()}
    d.update(extra)
    return d
