"""JSON Schema (draft 2020-12) of ``report.json`` written by ``willmore-ch verify``."""

SCHEMA_VERSION = "1.0"

_number_list = {"type": "array", "items": {"type": "number"}}

_fit = {
    "type": "object",
    "required": ["slope", "intercept", "r2", "stderr", "n"],
    "properties": {
        "slope": {"type": "number"},
        "intercept": {"type": "number"},
        "r2": {"type": "number"},
        "stderr": {"type": "number"},
        "n": {"type": "integer", "minimum": 4},
    },
}

CRITERION = {
    "type": "object",
    "required": ["number", "title", "passed", "measured", "budget_s"],
    "additionalProperties": False,
    "properties": {
        "number": {"type": "integer", "minimum": 1, "maximum": 12},
        "title": {"type": "string"},
        "passed": {"type": "boolean"},
        "measured": {"type": "object"},
        "budget_s": {"type": "number", "exclusiveMinimum": 0},
        "note": {"type": ["string", "null"]},
    },
}

RESIDUAL_REPORT = {
    "type": "object",
    "required": ["schema", "eps", "fits", "flags", "passed"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "eps": _number_list,
        "residual": {"type": "object", "additionalProperties": _number_list},
        "ablation": {"type": "object", "additionalProperties": _number_list},
        "projection": {"type": "object", "additionalProperties": _number_list},
        "profile_match": {"type": ["number", "null"]},
        "monotonicity": {"type": "array", "items": {"type": "object"}},
        "zero_set": {"type": "object", "additionalProperties": _number_list},
        "fits": {"type": "object", "additionalProperties": _fit},
        "flags": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "config": {"type": "object"},
        "passed": {"type": "boolean"},
    },
}

VERIFY_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "willmore-ch verify report",
    "type": "object",
    "required": ["schema", "config", "criteria", "residual_report", "passed"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "config": {
            "type": "object",
            "required": ["eps", "tilt", "weight", "delta", "ablate"],
            "properties": {
                "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.125},
                        "minItems": 1},
                "tilt": {"enum": ["zero", "leading", "leading+psi"]},
                "weight": {"enum": ["tube", "normal", "x2"]},
                "delta": {"type": "number"},
                "ablate": {"type": "array", "items": {"type": "string"}},
            },
        },
        "criteria": {"type": "array", "items": CRITERION, "minItems": 1},
        "residual_report": {"oneOf": [RESIDUAL_REPORT, {"type": "null"}]},
        "passed": {"type": "boolean"},
    },
}


def validate_report(doc):
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match."""
    import jsonschema

    jsonschema.validate(doc, VERIFY_REPORT)
