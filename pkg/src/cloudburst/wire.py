"""Canonical JSON serialization for payloads, state hashing and receipts.

Anything crossing the bus or entering a hash must pass through here so
two runs of the same seed produce byte-identical wire forms. Grids are
referenced by content hash rather than inlined.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from enum import Enum

import numpy as np

from .grids import GridField


def to_jsonable(obj: object) -> object:
    """Recursively convert payload objects to JSON-native structures."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        if not np.isfinite(obj):
            raise ValueError("non-finite float in payload")
        return obj
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, GridField):
        return {"$grid": obj.content_hash()}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return to_jsonable(float(obj))
    if isinstance(obj, np.ndarray):
        if obj.size > 64:
            digest = hashlib.sha256(
                np.ascontiguousarray(obj).tobytes()).hexdigest()
            return {"$nd": digest, "shape": list(obj.shape),
                    "dtype": str(obj.dtype)}
        return [to_jsonable(x) for x in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    raise TypeError(f"not wire-serializable: {type(obj)!r}")


def canonical_json(obj: object) -> str:
    return json.dumps(to_jsonable(obj), separators=(",", ":"), sort_keys=True,
                      allow_nan=False)


def content_hash(obj: object) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()
