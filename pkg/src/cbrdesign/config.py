"""Problem descriptions as JSON documents.

A config file holds four sections: ``design_space`` (points with labels and
coordinates), ``regression`` (explicit per-point vectors or a polynomial
basis), ``criterion`` (raw compound terms, one of the random-coefficient
builders, or the built-in line example), and ``constraints``.  Matrices are
nested row-major lists; ``null`` in an upper bound means unbounded.

Structure is checked against a JSON schema first (errors carry the JSON
path), then semantic validation happens in the model constructors with the
path added on the way out.
"""
from __future__ import annotations

import json
from typing import Any

import numpy as np
import jsonschema

from .errors import CbrdesignError, ConfigError
from .model import (
    CbrcProblem,
    ConstraintRow,
    Design,
    DesignSpace,
    LinearConstraintSet,
    RegressionMap,
)
from . import rcr

_NUM = {"type": "number"}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 1}, "minItems": 1}
_VECTOR = {"type": "array", "items": _NUM, "minItems": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "design_space": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "label": {"type": "string"},
                    "coordinate": _VECTOR,
                },
                "required": ["coordinate"],
            },
        },
        "regression": {
            "type": "object",
            "oneOf": [
                {
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "explicit"},
                        "vectors": _MATRIX,
                    },
                    "required": ["type", "vectors"],
                },
                {
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "polynomial"},
                        "degree": {"type": "integer", "minimum": 0},
                    },
                    "required": ["type", "degree"],
                },
            ],
        },
        "criterion": {
            "type": "object",
            "oneOf": [
                {
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "cbrc"},
                        "terms": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "additionalProperties": False,
                                "properties": {"B": _MATRIX, "H": _MATRIX},
                                "required": ["B", "H"],
                            },
                        },
                    },
                    "required": ["type", "terms"],
                },
                {
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "rcr_linear"},
                        "n": {"type": "integer", "minimum": 2},
                        "D": _MATRIX,
                        "A": _MATRIX,
                    },
                    "required": ["type", "n", "D", "A"],
                },
                {
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "rcr_imse"},
                        "n": {"type": "integer", "minimum": 2},
                        "D": _MATRIX,
                        "nu": _VECTOR,
                    },
                    "required": ["type", "n", "D"],
                },
                {
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "paper_example"},
                        "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                        "with_constraint10": {"type": "boolean"},
                    },
                    "required": ["type", "rho"],
                },
            ],
        },
        "constraints": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rows": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "coefficients": _VECTOR,
                            "relation": {"enum": ["<=", "=", ">="]},
                            "rhs": _NUM,
                            "name": {"type": "string"},
                        },
                        "required": ["coefficients", "relation", "rhs"],
                    },
                },
                "total_trials": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "relation": {"enum": ["<=", "=", ">="]},
                        "value": _NUM,
                    },
                    "required": ["relation", "value"],
                },
                "bounds": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "lower": _VECTOR,
                        "upper": {
                            "type": "array",
                            "items": {"type": ["number", "null"]},
                            "minItems": 1,
                        },
                    },
                },
                "integrality": {"type": "boolean"},
            },
        },
    },
    "required": ["criterion"],
}


def load_config(path: str) -> dict:
    """Read and structurally validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    validate_config(doc)
    return doc


def validate_config(doc: Any) -> None:
    """Schema-validate a parsed config; ConfigError carries the JSON path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = "$" + "".join(
            f"[{part}]" if isinstance(part, int) else f".{part}"
            for part in err.absolute_path
        )
        raise ConfigError(err.message, path=path)


def _matrix(doc: Any, path: str) -> np.ndarray:
    m = np.asarray(doc, dtype=float)
    if m.ndim != 2:
        raise ConfigError("matrix rows have inconsistent lengths", path=path)
    return m


def _space_from_config(doc: dict) -> DesignSpace:
    pts = doc.get("design_space")
    if pts is None:
        raise ConfigError("design_space is required for this criterion", path="$.design_space")
    coords = []
    labels = []
    width = len(pts[0]["coordinate"])
    for i, pt in enumerate(pts):
        if len(pt["coordinate"]) != width:
            raise ConfigError(
                "coordinates have inconsistent dimensions", path=f"$.design_space[{i}].coordinate"
            )
        coords.append([float(v) for v in pt["coordinate"]])
        labels.append(pt.get("label"))
    arr = np.asarray(coords)
    if all(lab is None for lab in labels):
        return DesignSpace.from_coords(arr if width > 1 else arr.reshape(-1, 1))
    final = []
    for i, lab in enumerate(labels):
        if lab is None:
            raise ConfigError(
                "either label every point or none", path=f"$.design_space[{i}]"
            )
        final.append(lab)
    return DesignSpace(tuple(final), arr)


def _regression_from_config(doc: dict, space: DesignSpace) -> RegressionMap:
    reg = doc.get("regression")
    if reg is None:
        raise ConfigError("regression is required for this criterion", path="$.regression")
    if reg["type"] == "explicit":
        return RegressionMap(space, _matrix(reg["vectors"], "$.regression.vectors"))
    return RegressionMap.polynomial(space, int(reg["degree"]))


def _constraints_from_config(
    doc: dict, npoints: int, base: LinearConstraintSet | None = None
) -> LinearConstraintSet:
    section = doc.get("constraints")
    if section is None:
        return base if base is not None else LinearConstraintSet.unconstrained(npoints)
    rows = list(base.rows) if base is not None else []
    for i, r in enumerate(section.get("rows", [])):
        coef = np.asarray(r["coefficients"], dtype=float)
        if coef.shape[0] != npoints:
            raise ConfigError(
                f"expected {npoints} coefficients, got {coef.shape[0]}",
                path=f"$.constraints.rows[{i}].coefficients",
            )
        rows.append(ConstraintRow(coef, r["relation"], float(r["rhs"]), name=r.get("name", f"row[{i}]")))
    total = base.total_trials if base is not None else None
    if "total_trials" in section:
        tt = section["total_trials"]
        total = (tt["relation"], float(tt["value"]))
    lower = np.array(base.lower) if base is not None else None
    upper = np.array(base.upper) if base is not None else None
    if "bounds" in section:
        bounds = section["bounds"]
        if "lower" in bounds:
            lower = np.asarray(bounds["lower"], dtype=float)
            if lower.shape[0] != npoints:
                raise ConfigError(
                    f"expected {npoints} entries", path="$.constraints.bounds.lower"
                )
        if "upper" in bounds:
            upper = np.asarray(
                [np.inf if v is None else float(v) for v in bounds["upper"]], dtype=float
            )
            if upper.shape[0] != npoints:
                raise ConfigError(
                    f"expected {npoints} entries", path="$.constraints.bounds.upper"
                )
    integrality = bool(section.get("integrality", base.integrality if base is not None else False))
    return LinearConstraintSet(
        npoints,
        rows=tuple(rows),
        total_trials=total,
        lower=lower,
        upper=upper,
        integrality=integrality,
    )


def problem_from_config(doc: dict) -> CbrcProblem:
    """Build a CbrcProblem from a validated config document.

    For the built-in ``paper_example`` criterion the design space and
    regression sections are generated internally (any provided ones are
    ignored) and a ``constraints`` section, when present, is merged on top
    of the built-in total-trials and spacing restrictions.
    """
    validate_config(doc)
    crit = doc["criterion"]
    kind = crit["type"]
    try:
        if kind == "paper_example":
            problem = rcr.line_example(
                float(crit["rho"]), spaced=bool(crit.get("with_constraint10", False))
            )
            if "constraints" in doc:
                merged = _constraints_from_config(
                    doc, problem.space.size, base=problem.constraints
                )
                problem = problem.with_constraints(merged)
            return problem

        space = _space_from_config(doc)
        regression = _regression_from_config(doc, space)
        if kind == "cbrc":
            terms = tuple(
                (
                    _matrix(t["B"], f"$.criterion.terms[{j}].B"),
                    _matrix(t["H"], f"$.criterion.terms[{j}].H"),
                )
                for j, t in enumerate(crit["terms"])
            )
            constraints = _constraints_from_config(doc, space.size)
            return CbrcProblem(space, regression, terms, constraints)

        # the two random-coefficient builders; m comes from total_trials
        constraints = _constraints_from_config(doc, space.size)
        if constraints.total_trials is None or constraints.total_trials[0] != "=":
            raise ConfigError(
                "random-coefficient criteria need constraints.total_trials "
                'with relation "=" (the per-individual trial budget)',
                path="$.constraints.total_trials",
            )
        m_trials = constraints.total_trials[1]
        if abs(m_trials - round(m_trials)) > 1e-9 or m_trials < 1:
            raise ConfigError(
                "total_trials value must be a positive integer for "
                "random-coefficient criteria",
                path="$.constraints.total_trials.value",
            )
        spec = rcr.RcrSpec(
            regression=regression,
            n_individuals=int(crit["n"]),
            trials_per_individual=int(round(m_trials)),
            dispersion=_matrix(crit["D"], "$.criterion.D"),
        )
        if kind == "rcr_linear":
            problem = rcr.linear_prediction_problem(spec, _matrix(crit["A"], "$.criterion.A"))
        else:
            if "nu" in crit:
                nu = np.asarray(crit["nu"], dtype=float)
                if nu.shape[0] != space.size:
                    raise ConfigError(
                        f"expected {space.size} entries", path="$.criterion.nu"
                    )
            else:
                nu = rcr.uniform_point_weights(space)
            problem = rcr.imse_problem(spec, nu)
        # keep any user rows/bounds/integrality alongside the builder's total
        return problem.with_constraints(
            _constraints_from_config(doc, space.size, base=problem.constraints)
        )
    except ConfigError:
        raise
    except CbrdesignError as exc:
        raise ConfigError(str(exc), path="$.criterion") from exc


def design_from_file(path: str, space: DesignSpace) -> Design:
    """Read a design from a JSON file.

    Accepts three layouts: a solution object with a ``design`` field, an
    object with ``weights`` (dense list in space order, or label-to-weight
    mapping), or a bare list of weights.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read design: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if isinstance(doc, dict) and "design" in doc:
        doc = doc["design"]
    if isinstance(doc, dict) and "labels" in doc and "weights" in doc:
        labels = tuple(doc["labels"])
        if labels != space.labels:
            raise ConfigError("design labels do not match the problem's design space")
        doc = doc["weights"]
    elif isinstance(doc, dict) and "weights" in doc:
        doc = doc["weights"]
    try:
        if isinstance(doc, dict):
            return Design.from_dict(space, {str(k): float(v) for k, v in doc.items()})
        weights = np.asarray(doc, dtype=float)
        if weights.ndim != 1 or weights.shape[0] != space.size:
            raise ConfigError(
                f"expected {space.size} weights, got shape {weights.shape}"
            )
        return Design(space, weights)
    except ConfigError:
        raise
    except (TypeError, ValueError, CbrdesignError) as exc:
        raise ConfigError(f"bad design file: {exc}") from exc
