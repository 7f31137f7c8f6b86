"""Run manifests: JSON with a fixed key order and every float written with 17 significant digits."""
import json
import math

import numpy as np

from .fieldio import FLOAT_FMT, atomic_write_text

FORMAT_VERSION = 1


def _encode(value, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan; they are written as null
        return FLOAT_FMT % value if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(value).__name__} in a manifest")


def dumps(obj, indent=2):
    """Serialise ``obj`` preserving dict insertion order; floats use %.17g."""
    return _encode(obj, indent, 0) + "\n"


def write(obj, path):
    atomic_write_text(path, dumps(obj))


def read(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)
