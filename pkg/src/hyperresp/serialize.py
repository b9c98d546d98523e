"""Versioned JSON/CSV plumbing shared by every artifact."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .hilbert import DensityMatrix, PureState

SCHEMA_VERSION = "1.0"


class SchemaError(ValueError):
    pass


def check_schema(doc: dict, kind: str | None = None) -> dict:
    """Refuse documents without a schema tag or with a newer major version."""
    version = doc.get("schema_version")
    if version is None:
        raise SchemaError("missing schema_version")
    major = int(str(version).split(".")[0])
    if major > int(SCHEMA_VERSION.split(".")[0]):
        raise SchemaError(f"schema_version {version} is newer than supported {SCHEMA_VERSION}")
    if kind is not None and doc.get("kind") != kind:
        raise SchemaError(f"expected a {kind!r} document, got {doc.get('kind')!r}")
    return doc


def tagged(kind: str, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **body}


def matrix_to_json(m: np.ndarray) -> list:
    """Complex matrix as nested ``[re, im]`` pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows: list) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def vector_to_json(v: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def vector_from_json(rows: list) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    return a[:, 0] + 1j * a[:, 1]


def write_json(path: str | Path, doc: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def read_json(path: str | Path, kind: str | None = None) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return check_schema(doc, kind)


def state_to_json(state) -> dict:
    """Pure states as amplitudes, mixed states as matrices, both with basis labels."""
    if hasattr(state, "amplitudes"):
        return {"type": "pure", "labels": list(state.labels), "dims": list(state.dims),
                "amplitudes": vector_to_json(state.amplitudes)}
    return {"type": "mixed", "labels": list(state.labels), "dims": list(state.dims),
            "matrix": matrix_to_json(state.matrix)}


def state_from_json(doc: dict):
    if doc["type"] == "pure":
        return PureState(vector_from_json(doc["amplitudes"]), tuple(doc["labels"]), tuple(doc["dims"]))
    return DensityMatrix(matrix_from_json(doc["matrix"]), tuple(doc["labels"]), tuple(doc["dims"]))
