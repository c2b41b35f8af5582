"""
Deterministic output writers
CSV with a header row and %.12e floats, JSON with sorted keys
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Tuple, Union

import numpy as np

FLOAT_FORMAT = "%.12e"


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers to JSON-safe values"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _encode(value: Any, depth: int) -> str:
    """JSON text of a to_jsonable value, two-space indent, floats in FLOAT_FORMAT"""
    pad = "  " * (depth + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k, ensure_ascii=False)}: {_encode(value[k], depth + 1)}" for k in sorted(value)]
        return "{\n" + ",\n".join(items) + "\n" + "  " * depth + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [pad + _encode(v, depth + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + "  " * depth + "]"
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return json.dumps(value, ensure_ascii=False)


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = _encode(to_jsonable(payload), 0)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def trajectory_rows(trajectory, names: Sequence[str]) -> Tuple[List[str], List[List[Any]]]:
    """Header and rows: time, <name>_re, <name>_im ..., trace_re, trace_im"""
    header = ["time"]
    for name in names:
        header += [f"{name}_re", f"{name}_im"]
    header += ["trace_re", "trace_im"]

    rows = []
    for i, t in enumerate(trajectory.times):
        row: List[Any] = [float(t)]
        for name in names:
            value = complex(trajectory.observables[name][i])
            row += [value.real, value.imag]
        tr = complex(trajectory.trace_log[i])
        row += [tr.real, tr.imag]
        rows.append(row)
    return header, rows
