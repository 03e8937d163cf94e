"""Scenario documents: JSON schema, validation and typed view."""
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .environment import VACUUM, EnvironmentState
from .errors import ConfigInvalid
from .phase_space import WeylLabel
from .spectral import FormFactor

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INTERVAL = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_LABEL = {"type": "object", "additionalProperties": False,
          "properties": {"a": _NUM, "b": _NUM}, "required": ["a", "b"]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "irdecoherence scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "model", "form_factor", "time_grid"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "model": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["velocity", "position"]},
                "omega0": _POS,
                "alpha_sq": {"type": "number", "minimum": 0, "maximum": 1},
                "n_modes": {"type": "integer", "minimum": 2},
                "grid_scheme": {"enum": ["midpoint", "log"]},
            },
        },
        "form_factor": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "sigma": _NUM,
                "cutoff": _POS,
                "amplitude": {"type": "number", "minimum": 0},
                "coupling_norm": {"type": "number", "minimum": 0},
                "table_csv": {"type": "string"},
            },
            "if": {"not": {"required": ["table_csv"]}},
            "then": {"required": ["sigma", "cutoff"]},
        },
        "environment": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": ["vacuum", "thermal"]}, "beta": _POS},
        },
        "labels": {"type": "array", "items": _LABEL, "minItems": 1},
        "superselection": {
            "type": "object", "additionalProperties": False,
            "required": ["I1", "I2", "terms"],
            "properties": {
                "I1": _INTERVAL, "I2": _INTERVAL,
                "terms": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["a", "b"],
                    "properties": {"c": {"oneOf": [_NUM, {"type": "array", "items": _NUM,
                                                          "minItems": 2, "maxItems": 2}]},
                                   "a": _NUM, "b": _NUM}}},
            },
        },
        "time_grid": {
            "type": "object", "additionalProperties": False,
            "required": ["t_max", "samples"],
            "properties": {
                "scheme": {"enum": ["linear", "log"]},
                "t_min": {"type": "number", "minimum": 0},
                "t_max": _POS,
                "samples": {"type": "integer", "minimum": 2},
            },
        },
        "oracle": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "n": {"type": "integer", "minimum": 4},
                "grid_scheme": {"enum": ["midpoint", "log"]},
                "tolerance": _POS,
                "max_points": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _field_of(err):
    path = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        m = re.match(r"'([^']+)' is a required property", err.message)
        if m:
            path.append(m.group(1))
    elif err.validator == "additionalProperties":
        m = re.search(r"\('([^']+)'", err.message)
        if m:
            path.append(m.group(1))
    return ".".join(path) or None


def validate(doc):
    """Raise :class:`ConfigInvalid` naming the first offending field."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        fld = _field_of(err)
        raise ConfigInvalid(f"{fld or '<root>'}: {err.message}", field=fld)
    model = doc["model"]
    if model["kind"] == "velocity":
        for key in ("omega0", "n_modes", "grid_scheme"):
            if key in model:
                raise ConfigInvalid(f"model.{key} is not used by the velocity model",
                                    field=f"model.{key}")
    else:
        if "omega0" not in model:
            raise ConfigInvalid("position model requires model.omega0", field="model.omega0")
        if "alpha_sq" in model:
            raise ConfigInvalid("model.alpha_sq applies to the velocity model only",
                                field="model.alpha_sq")
    ff = doc["form_factor"]
    if "table_csv" in ff and set(ff) - {"table_csv"}:
        extra = sorted(set(ff) - {"table_csv"})[0]
        raise ConfigInvalid("table_csv excludes analytic parameters", field=f"form_factor.{extra}")
    if "amplitude" in ff and "coupling_norm" in ff:
        raise ConfigInvalid("give either amplitude or coupling_norm", field="form_factor.coupling_norm")
    env = doc.get("environment", {"kind": "vacuum"})
    if env["kind"] == "thermal" and "beta" not in env:
        raise ConfigInvalid("thermal environment requires beta", field="environment.beta")
    if env["kind"] == "vacuum" and "beta" in env:
        raise ConfigInvalid("vacuum environment takes no beta", field="environment.beta")
    grid = doc["time_grid"]
    t_min = grid.get("t_min", 0.0 if grid.get("scheme", "linear") == "linear" else None)
    if grid.get("scheme") == "log" and not (t_min and t_min > 0):
        raise ConfigInvalid("log time grid needs t_min > 0", field="time_grid.t_min")
    if t_min is not None and t_min >= grid["t_max"]:
        raise ConfigInvalid("t_min must be below t_max", field="time_grid.t_min")
    ss = doc.get("superselection")
    if ss:
        for key in ("I1", "I2"):
            lo, hi = ss[key]
            if not lo < hi:
                raise ConfigInvalid(f"{key} must satisfy lo < hi", field=f"superselection.{key}")


@dataclass(frozen=True)
class Scenario:
    """Validated scenario with typed accessors."""

    doc: dict
    base_dir: Path = field(default=Path("."))

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigInvalid(f"scenario file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc, path.parent)

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        if not isinstance(doc, dict):
            raise ConfigInvalid("scenario must be a JSON object")
        validate(doc)
        return cls(doc, Path(base_dir))

    @property
    def name(self):
        return self.doc.get("name", "scenario")

    @property
    def kind(self):
        return self.doc["model"]["kind"]

    @property
    def omega0(self):
        return self.doc["model"].get("omega0")

    def form_factor(self):
        ff = self.doc["form_factor"]
        if "table_csv" in ff:
            return FormFactor.from_csv(self.base_dir / ff["table_csv"])
        J = FormFactor(sigma=ff["sigma"], cutoff=ff["cutoff"], amplitude=ff.get("amplitude", 1.0))
        if "coupling_norm" in ff:
            J = J.with_norm(ff["coupling_norm"])
        return J

    def environment(self):
        env = self.doc.get("environment", {"kind": "vacuum"})
        return VACUUM if env["kind"] == "vacuum" else EnvironmentState.thermal(env["beta"])

    def labels(self):
        return [WeylLabel(float(x["a"]), float(x["b"]))
                for x in self.doc.get("labels", [{"a": 0.0, "b": 1.0}])]

    def times(self):
        g = self.doc["time_grid"]
        if g.get("scheme", "linear") == "log":
            return np.geomspace(g["t_min"], g["t_max"], g["samples"])
        return np.linspace(g.get("t_min", 0.0), g["t_max"], g["samples"])

    @property
    def oracle(self):
        return {"enabled": False, "n": 1024, "grid_scheme": "midpoint", "tolerance": 1e-4,
                "max_points": 12, **self.doc.get("oracle", {})}

    @property
    def superselection(self):
        return self.doc.get("superselection")

    @property
    def output_dir(self):
        return self.doc.get("output", {}).get("dir")
