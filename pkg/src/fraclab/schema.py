"""Locate the shipped JSON schemas and validate emitted documents."""

from __future__ import annotations

import json
import os
from functools import lru_cache
from pathlib import Path

import jsonschema

SCHEMA_FOR_KIND = {
    "certificate": "certificate",
    "solve": "solve_report",
    "perron": "perron_report",
    "regularity": "regularity_report",
    "rhs-independence": "rhs_independence",
    "constant": "constant",
    "eval": "eval",
}


def schema_dir() -> Path:
    env = os.environ.get("FRACLAB_SCHEMAS")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "schemas"


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    return json.loads((schema_dir() / f"{name}.schema.json").read_text())


def validate(doc: dict, name: str | None = None) -> None:
    """Raise jsonschema.ValidationError unless ``doc`` matches its schema.

    Without ``name`` the schema is chosen from the document's ``kind``.
    """
    name = name or SCHEMA_FOR_KIND[doc["kind"]]
    jsonschema.validate(doc, load_schema(name))


def validate_file(path, name: str | None = None) -> dict:
    doc = json.loads(Path(path).read_text())
    validate(doc, name)
    return doc
