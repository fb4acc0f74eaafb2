"""JSON and hashing helpers shared by the report writers."""

from __future__ import annotations

import hashlib
import json
import math
import os
from typing import Any

import numpy as np


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        # NaN/Inf are not valid JSON
        return value if math.isfinite(value) else str(value)
    return obj


def dumps(obj: Any) -> str:
    # floats go through repr, which round-trips exactly
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj: Any, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as outf:
        outf.write(dumps(obj))


def read_json(path) -> Any:
    with open(path, encoding="utf-8") as inf:
        return json.load(inf)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as inf:
        for chunk in iter(lambda: inf.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
