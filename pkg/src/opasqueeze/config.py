"""JSON config documents: schemas, unit handling and object builders.

Every quantity with a unit carries it in the key name. Powers may be given
as ``*_mW`` or ``*_W`` and angles as ``*_deg`` or ``*_rad``; exactly one
form must be present. Builders return SI/radian domain objects.
"""
from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema

from .cavity import CavityLayout, CurvedMirror, FlatInterface, Gap, Slab
from .errors import DomainError, InputError, LayoutError
from .quadrature import CavityConstants, SqueezerParams
from .synth import TraceSpec

SCHEMA_VERSION = 1
BUILTIN_PREFIX = "builtin:"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

CAVITY_CONSTANTS_SCHEMA = {
    "type": "object",
    "required": ["T", "L", "round_trip_length_m"],
    "properties": {"T": _num, "L": _num, "round_trip_length_m": _pos},
    "additionalProperties": False,
}

PARAMS_SCHEMA = {
    "type": "object",
    "required": ["eta", "cavity"],
    "properties": {
        "eta": _num,
        "P_thr_mW": _pos, "P_thr_W": _pos,
        "theta_fluc_deg": _nonneg, "theta_fluc_rad": _nonneg,
        "cavity": CAVITY_CONSTANTS_SCHEMA,
    },
    "additionalProperties": False,
}

ELEMENT_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["mirror", "gap", "slab", "interface"]},
        "roc_m": {"type": ["number", "null"]},
        "reflectivity": _num,
        "immersed_index": _num,
        "length_m": _pos,
        "index": _num,
        "note": {"type": "string"},
    },
    "additionalProperties": False,
}

LAYOUT_SCHEMA = {
    "type": "object",
    "required": ["wavelength_m", "elements"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "wavelength_m": _pos,
        "round_trip_loss": _nonneg,
        "elements": {"type": "array", "items": ELEMENT_SCHEMA, "minItems": 3},
    },
    "additionalProperties": False,
}

_pump_list = {"type": "array", "items": _nonneg, "minItems": 1}
_freq_range = {
    "type": "object",
    "required": ["start", "stop", "n"],
    "properties": {"start": _num, "stop": _num, "n": {"type": "integer"}},
    "additionalProperties": False,
}

TRACE_SPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "n_points": {"type": "integer"},
        "rbw_Hz": _pos,
        "vbw_Hz": _pos,
        "n_averages": {"type": "integer"},
        "relative_scatter": {"type": ["number", "null"]},
        "dark_level": _nonneg,
        "dark_level_dB": _num,
    },
    "additionalProperties": False,
}

_base = {"schema_version": {"const": SCHEMA_VERSION}, "description": {"type": "string"}}

COMMAND_SCHEMAS = {
    "model": {
        "type": "object",
        "required": ["params", "pump_mW", "frequency_Hz"],
        "properties": {
            **_base,
            "params": PARAMS_SCHEMA,
            "pump_mW": {"anyOf": [_nonneg, _pump_list]},
            "frequency_Hz": _nonneg,
        },
        "additionalProperties": False,
    },
    "spectrum": {
        "type": "object",
        "required": ["params", "pump_mW", "frequency_Hz"],
        "properties": {
            **_base,
            "params": PARAMS_SCHEMA,
            "pump_mW": _pump_list,
            "frequency_Hz": _freq_range,
            "include_zero_phase_noise": {"type": "boolean"},
        },
        "additionalProperties": False,
    },
    "fit": {
        "type": "object",
        "required": ["dataset"],
        "properties": {
            **_base,
            "dataset": {"type": "string"},
            "cavity": CAVITY_CONSTANTS_SCHEMA,
            "residual_domain": {"enum": ["db", "linear"]},
            "max_iterations": {"type": "integer", "minimum": 1},
            "fixed": {"type": "object"},
            "initial": {"type": "object"},
            "curve_points": {"type": "integer", "minimum": 2},
            "curve_out": {"type": "string"},
        },
        "additionalProperties": False,
    },
    "correct": {
        "type": "object",
        "required": ["measured", "vacuum"],
        "properties": {
            **_base,
            "measured": {"$ref": "#/$defs/source"},
            "vacuum": {"$ref": "#/$defs/source"},
            "dark": {"anyOf": [{"$ref": "#/$defs/source"}, {"type": "null"}]},
        },
        "additionalProperties": False,
        "$defs": {
            "source": {
                "type": "object",
                "properties": {"path": {"type": "string"}, "level_dB": _num},
                "minProperties": 1,
                "maxProperties": 1,
                "additionalProperties": False,
            }
        },
    },
    "cavity": LAYOUT_SCHEMA,
    "synth": {
        "type": "object",
        "required": ["kind", "params"],
        "properties": {
            **_base,
            "kind": {"enum": ["sweep", "trace", "spectrum"]},
            "params": PARAMS_SCHEMA,
            "seed": {"type": "integer", "minimum": 0},
            "trace": TRACE_SPEC_SCHEMA,
            "pump_mW": {"anyOf": [_nonneg, _pump_list]},
            "frequency_Hz": {"anyOf": [_pos, _freq_range]},
            "quadrature": {"enum": ["vacuum", "sqz", "antisqz", "dark"]},
            "pump_jitter_rel": _nonneg,
            "level_scatter_dB": {"type": ["number", "null"]},
        },
        "additionalProperties": False,
    },
}


def _path_of(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    return ".".join(parts) if parts else "<root>"


def validate(command: str, config: dict) -> None:
    """Schema-check ``config`` for ``command``; raises InputError naming the field."""
    schema = COMMAND_SCHEMAS[command]
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        field = _path_of(err)
        raise InputError(f"invalid {command} config at {field}: {err.message}", field=field)


def load_config(ref: str):
    """Read a JSON config from a path or a bundled ``builtin:NAME``.

    Returns (document, directory used to resolve relative paths).
    """
    if ref.startswith(BUILTIN_PREFIX):
        name = ref[len(BUILTIN_PREFIX):]
        if not name.endswith(".json"):
            name += ".json"
        res = resources.files("opasqueeze") / "configs" / name
        try:
            text = res.read_text()
        except (FileNotFoundError, OSError) as exc:
            raise InputError(f"no bundled config named {name!r}", field="--config") from exc
        base = Path(str(resources.files("opasqueeze") / "configs"))
    else:
        path = Path(ref)
        try:
            text = path.read_text()
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}", field="--config") from exc
        base = path.resolve().parent
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config {ref} is not valid JSON: {exc}", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise InputError(f"config {ref} must be a JSON object")
    return doc, base


def config_hash(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (bytes, bytearray)):
            h.update(part)
        else:
            h.update(json.dumps(part, sort_keys=True, separators=(",", ":")).encode())
        h.update(b"\0")
    return h.hexdigest()


def _one_of(doc, stem, units, field_prefix):
    present = [(u, doc[f"{stem}_{u}"]) for u in units if f"{stem}_{u}" in doc]
    if len(present) != 1:
        opts = " or ".join(f"{stem}_{u}" for u in units)
        raise InputError(f"{field_prefix}{stem}: give exactly one of {opts}", field=f"{field_prefix}{stem}")
    return present[0]


def power_w(doc, stem, field_prefix=""):
    unit, value = _one_of(doc, stem, ("mW", "W"), field_prefix)
    return value * 1e-3 if unit == "mW" else float(value)


def angle_rad(doc, stem, field_prefix=""):
    unit, value = _one_of(doc, stem, ("deg", "rad"), field_prefix)
    return math.radians(value) if unit == "deg" else float(value)


def cavity_constants(doc, field="cavity") -> CavityConstants:
    try:
        return CavityConstants(doc["T"], doc["L"], doc["round_trip_length_m"])
    except DomainError as exc:
        raise _field_domain(exc, field)


def squeezer_params(doc, field="params") -> SqueezerParams:
    cav = cavity_constants(doc["cavity"], f"{field}.cavity")
    pthr = power_w(doc, "P_thr", f"{field}.")
    theta = angle_rad(doc, "theta_fluc", f"{field}.")
    try:
        return SqueezerParams(doc["eta"], pthr, theta, cav)
    except DomainError as exc:
        raise _field_domain(exc, field)


class ConfigDomainError(DomainError):
    def __init__(self, message, field):
        super().__init__(message)
        self.field = field


def _field_domain(exc, field):
    return ConfigDomainError(f"{field}: {exc}", field)


def layout_from_doc(doc) -> tuple:
    """(CavityLayout, round_trip_loss) from a layout document."""
    elements = []
    for i, el in enumerate(doc["elements"]):
        where = f"elements.{i}"
        kind = el["type"]
        try:
            if kind == "mirror":
                roc = el.get("roc_m")
                elements.append(CurvedMirror(
                    math.inf if roc is None else roc,
                    el.get("reflectivity", 1.0),
                    el.get("immersed_index", 1.0),
                ))
            elif kind == "gap":
                elements.append(Gap(el["length_m"]))
            elif kind == "slab":
                elements.append(Slab(el["length_m"], el["index"]))
            else:
                elements.append(FlatInterface())
        except KeyError as exc:
            raise InputError(f"{where}: missing {exc.args[0]}", field=f"{where}.{exc.args[0]}") from exc
        except LayoutError as exc:
            raise InputError(f"{where}: {exc}", field=where) from exc
    try:
        layout = CavityLayout(tuple(elements), doc["wavelength_m"])
    except LayoutError as exc:
        raise InputError(f"elements: {exc}", field="elements") from exc
    return layout, float(doc.get("round_trip_loss", 0.0))


def trace_spec(doc, seed: int) -> TraceSpec:
    doc = doc or {}
    kwargs = {"seed": seed}
    mapping = {"n_points": "n_points", "rbw_Hz": "rbw", "vbw_Hz": "vbw",
               "n_averages": "n_averages", "relative_scatter": "relative_scatter",
               "dark_level": "dark_level"}
    for key, attr in mapping.items():
        if key in doc:
            kwargs[attr] = doc[key]
    if "dark_level_dB" in doc:
        if "dark_level" in doc:
            raise InputError("trace: give dark_level or dark_level_dB, not both", field="trace.dark_level")
        kwargs["dark_level"] = 10.0 ** (doc["dark_level_dB"] / 10.0)
    try:
        return TraceSpec(**kwargs)
    except DomainError as exc:
        raise InputError(f"trace: {exc}", field="trace") from exc
