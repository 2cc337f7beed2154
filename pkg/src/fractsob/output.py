"""Deterministic CSV and JSON artifacts.

CSV: comma delimiter, mandatory header row, floats with 17 significant digits.
JSON: ``"schema": 1`` first, infinities written as the strings "inf"/"-inf".
"""

from __future__ import annotations

import json
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating, Fraction)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    if x is None:
        return ""
    text = str(x)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row of length {len(row)} does not match header {list(header)}")
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


def write_table(path: str | os.PathLike, table: Sequence[dict]) -> Path:
    """Rows of dicts, columns in first-seen key order."""
    header: list[str] = []
    for row in table:
        for k in row:
            if k not in header:
                header.append(k)
    return write_csv(path, header, ([row.get(k) for k in header] for row in table))


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


def report_payload(command: str, config: dict, body: dict, conversion: dict | None = None) -> dict:
    payload = {"schema": SCHEMA_VERSION, "command": command, "config": config}
    if conversion is not None:
        payload["conversion"] = conversion
    payload.update(body)
    return jsonable(payload)


def write_json(path: str | os.PathLike, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(jsonable(payload), fh, indent=2, allow_nan=False)
        fh.write("\n")
    return path
