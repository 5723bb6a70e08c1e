"""Versioned result documents with provenance.

Every document has the shape ``{"schema", "kind", "provenance", "result"}``.
``provenance`` records the tool version, a hash of the input, the seed, the
cancellation pair and a snapshot of the configuration.  Values are plain
JSON: numpy scalars and arrays are converted, non-finite floats become
strings ``"inf"``, ``"-inf"`` or ``"nan"``.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

RESULT_SCHEMA_ID = "lcr.result/1"

RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": RESULT_SCHEMA_ID,
    "type": "object",
    "required": ["schema", "kind", "provenance", "result"],
    "properties": {
        "schema": {"const": RESULT_SCHEMA_ID},
        "kind": {"type": "string"},
        "provenance": {
            "type": "object",
            "required": ["tool", "version", "input_hash", "seed", "pair_id", "config"],
            "properties": {
                "tool": {"type": "string"},
                "version": {"type": "string"},
                "input_hash": {"type": ["string", "null"]},
                "seed": {"type": ["integer", "null"]},
                "pair_id": {"type": ["integer", "null"]},
                "config": {"type": "object"},
            },
        },
        "result": {"type": "object"},
    },
}


def to_jsonable(obj):
    """Recursively convert dataclasses, numpy values and floats to JSON."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def provenance(input_hash=None, seed=None, pair_id=None, config=None):
    from . import __version__

    return {
        "tool": "lcr",
        "version": __version__,
        "input_hash": input_hash,
        "seed": seed,
        "pair_id": pair_id,
        "config": to_jsonable(config or {}),
    }


def document(kind, result, prov):
    return {"schema": RESULT_SCHEMA_ID, "kind": kind, "provenance": prov,
            "result": to_jsonable(result)}


def dumps(doc):
    """Deterministic JSON text (sorted keys, trailing newline)."""
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def validate(doc):
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match."""
    import jsonschema

    jsonschema.validate(doc, RESULT_SCHEMA)
