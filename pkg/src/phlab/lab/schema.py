"""Scenario documents: JSON schema, validation and typed views."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

SCHEMA_VERSION = 1

_NUM_LIST = {"type": "array", "items": {"type": "number"}}
_POS_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
_EPS_LADDER = {"type": "array", "minItems": 1,
               "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5}}

_EXPERIMENTS = {
    "homology": {},
    "volume_growth": {
        "r": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.25},
        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                             "maximum": 0.25}, "minItems": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "n_max": {"type": "integer", "minimum": 6, "maximum": 40},
        "max_edge": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.25},
        "inverse": {"type": "boolean"},
    },
    "entropy": {
        "eps_ladder": _EPS_LADDER,
        "n_max": {"type": "integer", "minimum": 2, "maximum": 40},
        "resolution": _POS_INT_LIST,
        "factorize": {"type": "boolean"},
    },
    "measure_entropy": {
        "resolution": _POS_INT_LIST,
        "orbit_length": {"type": "integer", "minimum": 10_000, "maximum": 10**8},
        "chains": {"type": "integer", "minimum": 1},
        "m_max": {"type": "integer", "minimum": 2, "maximum": 30},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "factorize": {"type": "boolean"},
    },
    "lyapunov": {
        "N": {"type": "integer", "minimum": 1000},
        "points": {"type": "integer", "minimum": 1, "maximum": 64},
        "reorth_every": {"type": "integer", "minimum": 1},
        "inverse": {"type": "boolean"},
    },
    "current": {
        "r": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.25},
        "n": {"type": "integer", "minimum": 2, "maximum": 20},
        "max_edge": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.25},
    },
    "jacobian": {
        "samples": {"type": "integer", "minimum": 1, "maximum": 10**6},
    },
    "fibers": {},
    "fiber_entropy": {
        "eps_ladder": _EPS_LADDER,
        "resolution": _POS_INT_LIST,
        "flow_time": {"type": "number", "exclusiveMinimum": 0, "maximum": 50},
    },
    "fiber_volume_growth": {
        "r": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.25},
        "n_max": {"type": "integer", "minimum": 6, "maximum": 200},
    },
    "verify": {},
}

TORAL_ONLY = {"homology", "volume_growth", "entropy", "measure_entropy", "lyapunov",
              "current", "jacobian"}
SKEW_ONLY = {"fibers", "fiber_entropy", "fiber_volume_growth"}

_MATRIX = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": {"type": "integer"}}}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "name", "seed", "map", "experiments"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "map": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "matrix", "unstable_dim"],
                    "properties": {
                        "kind": {"const": "toral"},
                        "matrix": _MATRIX,
                        "amplitude": {"type": "number", "minimum": 0, "maximum": 1},
                        "terms": {"type": "array", "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["coefficient", "frequency"],
                            "properties": {
                                "coefficient": _NUM_LIST,
                                "frequency": {"type": "array", "items": {"type": "integer"}},
                                "kind": {"enum": ["sin", "cos"]},
                            },
                        }},
                        "unstable_dim": {"type": "integer", "minimum": 1},
                        "center_dim": {"type": "integer", "minimum": 0},
                        "ph_constants": {
                            "type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                            "minItems": 4, "maxItems": 5,
                        },
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "matrix", "c", "epsilon"],
                    "properties": {
                        "kind": {"const": "skew"},
                        "matrix": _MATRIX,
                        "c": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
                        "epsilon": {"type": "number", "minimum": -0.05, "maximum": 0.05},
                    },
                },
            ]
        },
        "experiments": {
            "type": "array",
            "minItems": 1,
            "items": {"oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {"kind": {"const": kind}, **props},
                }
                for kind, props in _EXPERIMENTS.items()
            ]},
        },
    },
}


class ScenarioError(ValueError):
    """The scenario document is not valid."""


@dataclass(frozen=True)
class Experiment:
    kind: str
    params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    map: dict
    experiments: tuple
    schema_version: int = SCHEMA_VERSION

    @property
    def kinds(self) -> list:
        return [e.kind for e in self.experiments]

    def experiment(self, kind: str) -> Experiment | None:
        return next((e for e in self.experiments if e.kind == kind), None)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "seed": self.seed,
            "map": self.map,
            "experiments": [{"kind": e.kind, **e.params} for e in self.experiments],
        }


def validate(doc: dict) -> Scenario:
    """Check a scenario document against the schema and cross-field rules."""
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"invalid scenario at {where}: {exc.message}") from exc
    m = doc["map"]
    rows = m["matrix"]
    if any(len(r) != len(rows) for r in rows):
        raise ScenarioError("map matrix must be square")
    kinds = [e["kind"] for e in doc["experiments"]]
    if len(set(kinds)) != len(kinds):
        raise ScenarioError("each experiment kind may appear at most once")
    wrong = (SKEW_ONLY if m["kind"] == "toral" else TORAL_ONLY) & set(kinds)
    if wrong:
        raise ScenarioError(f"experiments {sorted(wrong)} do not apply to a {m['kind']} map")
    if m["kind"] == "toral":
        n = len(rows)
        for t in m.get("terms", []):
            if len(t["coefficient"]) != n or len(t["frequency"]) != n:
                raise ScenarioError("perturbation term dimension does not match the matrix")
        for e in doc["experiments"]:
            res = e.get("resolution")
            if res is not None and len(res) not in (1, n):
                raise ScenarioError(f"{e['kind']}: resolution needs 1 or {n} entries")
    elif len(rows) != 2:
        raise ScenarioError("skew maps need a 2x2 base matrix")
    exps = tuple(
        Experiment(e["kind"], {k: v for k, v in e.items() if k != "kind"})
        for e in doc["experiments"]
    )
    return Scenario(doc["name"], int(doc["seed"]), m, exps, doc["schema_version"])


def load(path) -> Scenario:
    with open(Path(path)) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return validate(doc)
