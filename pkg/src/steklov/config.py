"""Experiment configuration: JSON schema validation and defaulting."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema

from .dtn import DEFAULT_CLUSTER_TOL
from .exceptions import IoError, SchemaError
from .geometry import CurveSpec
from .harmonic import DEFAULT_SVD_TOL

__all__ = ["EXPERIMENTS", "ExperimentConfig", "parse_config", "load_config"]

EXPERIMENTS = ("spectrum", "derivative-check", "split", "critical-scan", "uc-check")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_pos_int = {"type": "integer", "minimum": 1}
_coeffs = {"type": "array", "items": _num}

TOP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["curve", "experiment"],
    "properties": {
        "curve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "base_radius": _pos,
                "cos": _coeffs,
                "sin": _coeffs,
                "n_nodes": _pos_int,
                "r_min": _pos,
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "basis_order": _pos_int,
                "svd_tol": _pos,
                "n_nodes": _pos_int,
                "cluster_tol": _pos,
            },
        },
        "experiment": {"enum": list(EXPERIMENTS)},
        "params": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string", "minLength": 1},
                "format": {"enum": ["json", "json+csv"]},
            },
        },
    },
}

_sigma = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"const": _num, "cos": _coeffs, "sin": _coeffs},
}

PARAM_SCHEMAS = {
    "spectrum": {"k_max": _pos_int},
    "derivative-check": {
        "cluster": _pos_int,
        "sigma": _sigma,
        "t_step": _pos,
        "k_max": _pos_int,
        "tolerance": _pos,
        "richardson": {"type": "boolean"},
    },
    "split": {
        "n_trials": _pos_int,
        "amplitude": _nonneg,
        "max_mode": _pos_int,
        "seed": {"type": "integer", "minimum": 0},
        "t_step": _pos,
        "n_eigs": _pos_int,
        "gap_min": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "check_rates": {"type": "boolean"},
    },
    "critical-scan": {
        "cluster": _pos_int,
        "n_grid": _pos_int,
        "eps_crit": _pos,
        "k_max": _pos_int,
    },
    "uc-check": {
        "n_fields": _pos_int,
        "arc_length_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "tol": _pos,
    },
}

PARAM_DEFAULTS = {
    "spectrum": {"k_max": 10},
    "derivative-check": {
        "cluster": 1,
        "sigma": {"const": 0.0, "cos": [0.0, 1.0], "sin": []},
        "t_step": 1e-4,
        "k_max": 12,
        "tolerance": 1e-4,
        "richardson": True,
    },
    "split": {
        "n_trials": 20,
        "amplitude": 0.05,
        "max_mode": 6,
        "seed": 42,
        "t_step": 1e-4,
        "n_eigs": 7,
        "gap_min": None,
        "check_rates": True,
    },
    "critical-scan": {"cluster": 1, "n_grid": 64, "eps_crit": 1e-6, "k_max": 10},
    "uc-check": {"n_fields": 10, "arc_length_fraction": 1 / 16, "tol": 1e-3},
}

SOLVER_DEFAULTS = {
    "basis_order": 24,
    "svd_tol": DEFAULT_SVD_TOL,
    "n_nodes": 256,
    "cluster_tol": DEFAULT_CLUSTER_TOL,
}
CURVE_DEFAULTS = {"base_radius": 1.0, "cos": [], "sin": [], "r_min": 0.05}
OUTPUT_DEFAULTS = {"path": "steklov_out", "format": "json"}


def _collect(schema, instance, prefix=()) -> list[tuple[str, str]]:
    validator = jsonschema.Draft7Validator(schema)
    out = []
    for err in sorted(validator.iter_errors(instance), key=lambda e: list(map(str, e.absolute_path))):
        path = list(prefix) + [str(p) for p in err.absolute_path]
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            for key in extra:
                out.append((".".join(path + [key]), "unknown key"))
            continue
        out.append((".".join(path) or "<root>", err.message))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration with every default filled in."""

    curve: dict
    solver: dict
    experiment: str
    params: dict
    output: dict

    def curve_spec(self) -> CurveSpec:
        c = self.curve
        return CurveSpec(
            tuple(c["cos"]), tuple(c["sin"]), c["base_radius"], self.solver["n_nodes"], c["r_min"]
        )

    def to_dict(self) -> dict:
        return copy.deepcopy(
            {
                "curve": self.curve,
                "solver": self.solver,
                "experiment": self.experiment,
                "params": self.params,
                "output": self.output,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_output(self, path: str) -> "ExperimentConfig":
        return ExperimentConfig(
            self.curve, self.solver, self.experiment, self.params, {**self.output, "path": path}
        )


def parse_config(text) -> ExperimentConfig:
    """Validate JSON text (or an already-decoded mapping) and fill defaults.

    ``curve.n_nodes`` is accepted for compatibility with curve files; when
    both it and ``solver.n_nodes`` are given they must agree.

    Raises
    ------
    SchemaError
        Listing every violation as ``(dotted.path, reason)``.
    """
    if isinstance(text, (str, bytes)):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError([("<root>", f"invalid JSON: {exc}")]) from exc
    else:
        data = copy.deepcopy(text)
    errors = _collect(TOP_SCHEMA, data)
    if isinstance(data, dict) and data.get("experiment") in PARAM_SCHEMAS and isinstance(data.get("params", {}), dict):
        schema = {
            "type": "object",
            "additionalProperties": False,
            "properties": PARAM_SCHEMAS[data["experiment"]],
        }
        errors += _collect(schema, data.get("params", {}), ("params",))
    if not errors:
        curve_n = data["curve"].get("n_nodes")
        solver_n = data.get("solver", {}).get("n_nodes")
        if curve_n is not None and solver_n is not None and curve_n != solver_n:
            errors.append(("solver.n_nodes", f"conflicts with curve.n_nodes={curve_n}"))
    if errors:
        raise SchemaError(errors)

    exp = data["experiment"]
    curve = {**CURVE_DEFAULTS, **data["curve"]}
    solver = {**SOLVER_DEFAULTS, **data.get("solver", {})}
    if "n_nodes" in curve:
        solver["n_nodes"] = curve.pop("n_nodes")
    params = {**copy.deepcopy(PARAM_DEFAULTS[exp]), **data.get("params", {})}
    if "sigma" in params:
        params["sigma"] = {"const": 0.0, "cos": [], "sin": [], **params["sigma"]}
    output = {**OUTPUT_DEFAULTS, **data.get("output", {})}
    return ExperimentConfig(curve, solver, exp, params, output)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(str(path), exc.strerror or str(exc)) from exc
    return parse_config(text)
