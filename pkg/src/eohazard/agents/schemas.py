"""JSON schemas for every message on the wire.

``docs/schemas.md`` documents these field by field; ``scripts/export_schemas.py``
writes them out as standalone files.
"""

from __future__ import annotations

import copy

import jsonschema

from .reports import SCHEMA_VERSION

_EVENT = {"type": "string", "enum": ["wildfire", "flood", "none"]}
_VERSION = {"type": "string", "const": SCHEMA_VERSION}
_MS = {"type": "number", "minimum": 0}

TOOL_RESULT = {
    "type": "object",
    "required": ["tool_name", "detected", "metrics", "mask_pixels", "elapsed_ms"],
    "additionalProperties": False,
    "properties": {
        "tool_name": {"type": "string", "enum": ["ml_fire", "index_fire", "burned_area", "ml_flood"]},
        "detected": {"type": "boolean"},
        "metrics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "active_fire_area_km2": {"type": "number", "minimum": 0},
                "burned_area_km2": {"type": "number", "minimum": 0},
                "hotspot_count": {"type": "number", "minimum": 0, "multipleOf": 1},
                "flood_area_km2": {"type": "number", "minimum": 0},
                "flood_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "mask_pixels": {"type": "integer", "minimum": 0},
        "elapsed_ms": _MS,
        "error": {"type": "string"},
    },
}

HYPOTHESIS_REPORT = {
    "type": "object",
    "required": ["schema_version", "scene_id", "predicted_event", "reasoning", "elapsed_ms"],
    "additionalProperties": False,
    "properties": {
        "schema_version": _VERSION,
        "scene_id": {"type": "string", "minLength": 1},
        "predicted_event": _EVENT,
        "reasoning": {"type": "string", "maxLength": 500},
        "elapsed_ms": _MS,
        "degraded": {"type": "boolean"},
        "hypothesis_absent": {"type": "boolean"},
    },
    "if": {"properties": {"predicted_event": {"enum": ["wildfire", "flood"]}}},
    "then": {"properties": {"reasoning": {"minLength": 1}}},
}

SPECIALIST_REPORT = {
    "type": "object",
    "required": ["schema_version", "scene_id", "specialist", "tool_results", "classification", "reasoning", "elapsed_ms"],
    "additionalProperties": False,
    "properties": {
        "schema_version": _VERSION,
        "scene_id": {"type": "string", "minLength": 1},
        "specialist": {"type": "string", "enum": ["wildfire", "flood"]},
        "tool_results": {"type": "array", "items": TOOL_RESULT},
        "classification": {"type": "string", "enum": ["event_confirmed", "past_event", "no_event"]},
        "reasoning": {"type": "string"},
        "elapsed_ms": _MS,
        "errors": {"type": "array", "items": {"type": "string"}},
    },
    "allOf": [
        {
            "if": {"properties": {"specialist": {"const": "wildfire"}}},
            "then": {
                "properties": {
                    "tool_results": {
                        "prefixItems": [
                            {"properties": {"tool_name": {"const": "ml_fire"}}},
                            {"properties": {"tool_name": {"const": "index_fire"}}},
                            {"properties": {"tool_name": {"const": "burned_area"}}},
                        ],
                        "minItems": 3,
                        "maxItems": 3,
                    }
                }
            },
        },
        {
            "if": {"properties": {"specialist": {"const": "flood"}}},
            "then": {
                "properties": {
                    "tool_results": {
                        "prefixItems": [{"properties": {"tool_name": {"const": "ml_flood"}}}],
                        "minItems": 1,
                        "maxItems": 1,
                    },
                    "classification": {"enum": ["event_confirmed", "no_event"]},
                }
            },
        },
    ],
}

FINAL_ALERT = {
    "type": "object",
    "required": ["schema_version", "scene_id", "decision", "event_type", "confidence", "reasoning", "provenance"],
    "additionalProperties": False,
    "properties": {
        "schema_version": _VERSION,
        "scene_id": {"type": "string", "minLength": 1},
        "decision": {"type": "string", "enum": ["alert", "no_alert"]},
        "event_type": _EVENT,
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
        "reasoning": {"type": "string"},
        "elapsed_ms": _MS,
        "provenance": {
            "type": "object",
            "required": ["hypothesis", "specialist_reports"],
            "additionalProperties": False,
            "properties": {
                "hypothesis": {"oneOf": [{"type": "null"}, HYPOTHESIS_REPORT]},
                "specialist_reports": {"type": "array", "items": SPECIALIST_REPORT},
            },
        },
    },
    "if": {"properties": {"decision": {"const": "alert"}}},
    "then": {"properties": {"event_type": {"enum": ["wildfire", "flood"]}}},
}

REASONER_REQUEST = {
    "type": "object",
    "required": ["schema_version", "role", "evidence"],
    "additionalProperties": False,
    "properties": {
        "schema_version": _VERSION,
        "role": {"type": "string", "enum": ["early_warning", "wildfire_specialist", "flood_specialist", "decision"]},
        "evidence": {"type": "object"},
    },
}

# label fields each role must return, with their allowed values
ROLE_LABELS = {
    "early_warning": {"predicted_event": ["wildfire", "flood", "none"]},
    "wildfire_specialist": {"classification": ["event_confirmed", "past_event", "no_event"]},
    "flood_specialist": {"classification": ["event_confirmed", "no_event"]},
    "decision": {"decision": ["alert", "no_alert"], "event_type": ["wildfire", "flood", "none"]},
}


def reasoner_response_schema(role: str) -> dict:
    labels = ROLE_LABELS[role]
    return {
        "type": "object",
        "required": ["reasoning", *labels],
        "properties": {
            "reasoning": {"type": "string"},
            **{name: {"type": "string", "enum": values} for name, values in labels.items()},
        },
    }


ANALYZE_REQUEST = {
    "type": "object",
    "required": ["scene_ref"],
    "properties": {
        "schema_version": _VERSION,
        "scene_ref": {"type": "string", "minLength": 1},
    },
}

DECIDE_REQUEST = {
    "type": "object",
    "required": ["hypothesis", "specialist_reports"],
    "properties": {
        "schema_version": _VERSION,
        "scene_id": {"type": "string"},
        "hypothesis": HYPOTHESIS_REPORT,
        "specialist_reports": {"type": "array", "items": SPECIALIST_REPORT},
    },
}

ERROR_PAYLOAD = {
    "type": "object",
    "required": ["code", "message", "node_id"],
    "properties": {
        "code": {"type": "string"},
        "message": {"type": "string"},
        "node_id": {"type": "string"},
    },
}

SCHEMAS = {
    "tool_result": TOOL_RESULT,
    "hypothesis_report": HYPOTHESIS_REPORT,
    "specialist_report": SPECIALIST_REPORT,
    "final_alert": FINAL_ALERT,
    "reasoner_request": REASONER_REQUEST,
    **{f"reasoner_response.{role}": reasoner_response_schema(role) for role in ROLE_LABELS},
    "analyze_request": ANALYZE_REQUEST,
    "decide_request": DECIDE_REQUEST,
    "error": ERROR_PAYLOAD,
}

_VALIDATORS = {name: jsonschema.Draft202012Validator(schema) for name, schema in SCHEMAS.items()}


def schema(name: str) -> dict:
    doc = copy.deepcopy(SCHEMAS[name])
    doc["$schema"] = "https://json-schema.org/draft/2020-12/schema"
    doc["title"] = name
    return doc


def validate(name: str, doc) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` violates schema ``name``."""
    err = jsonschema.exceptions.best_match(_VALIDATORS[name].iter_errors(doc))
    if err is not None:
        raise err


def errors(name: str, doc) -> list[str]:
    return [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in _VALIDATORS[name].iter_errors(doc)]
