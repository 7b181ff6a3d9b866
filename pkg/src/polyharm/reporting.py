"""Deterministic report serialization and fixed-order reductions.

All floating point values in reports are printed with 17 significant
digits so that JSON documents round-trip bit-exactly and repeated runs
diff clean.  Scalar reductions that feed reports go through ``fsum``
(exactly rounded, index ordered), never through accumulation-order-
dependent loops.
"""

from __future__ import annotations

import json
import math

import numpy as np


def stable_sum(values) -> float:
    """Exactly rounded sum of ``values`` taken in index order."""
    if isinstance(values, np.ndarray):
        values = values.ravel()
    return math.fsum(values)


def _fmt_float(x: float):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(float(x), ".17g")


def _emit(obj, parts, indent, level):
    pad = " " * (indent * level)
    inner = " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (key, val) in enumerate(obj.items()):
            parts.append(inner + json.dumps(str(key)) + ": ")
            _emit(val, parts, indent, level + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            parts.append("[]")
            return
        parts.append("[\n")
        for i, val in enumerate(obj):
            parts.append(inner)
            _emit(val, parts, indent, level + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "]")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(_fmt_float(float(obj)))
    elif obj is None:
        parts.append("null")
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj)!r} canonically")


def canonical_json(doc) -> str:
    """Serialize ``doc`` to canonical JSON (17 significant digits, fixed
    key order, non-finite floats as strings)."""
    parts = []
    _emit(doc, parts, 2, 0)
    parts.append("\n")
    return "".join(parts)


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        s = _fmt_float(float(v))
        return s.strip('"')
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def canonical_csv(header, rows) -> str:
    """CSV with the same float formatting rules as the JSON reports."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    return "\n".join(lines) + "\n"
