"""CSV/JSON serialization of bias matrices and reports."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .tensor import as_matrix, resolve_dtype, width_name


def format_value(x, dtype=np.float64) -> str:
    """Shortest decimal string that round-trips at the given width."""
    v = np.dtype(dtype).type(x) + np.dtype(dtype).type(0.0)  # drops -0.0
    if v == 0 or 1e-4 <= abs(v) < 1e16:
        return np.format_float_positional(v, unique=True, trim="-")
    return np.format_float_scientific(v, unique=True, trim="-")


def matrix_to_csv(values) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in values:
        writer.writerow(format_value(x, values.dtype) for x in row)
    return buf.getvalue()


def matrix_from_csv(text: str, width="f64") -> np.ndarray:
    dtype = resolve_dtype(width)
    rows = [[dtype.type(cell) for cell in row] for row in csv.reader(io.StringIO(text)) if row]
    return as_matrix(rows, width)


def bias_to_json(bias) -> str:
    values = bias.values
    return json.dumps({
        "kind": bias.kind,
        "width": width_name(values.dtype),
        "provenance": bias.provenance,
        "values": [[float(x) + 0.0 for x in row] for row in values],
    })


def matrix_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    return as_matrix(doc["values"], doc.get("width", "f64"))


def flatten(record: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            out[name] = json.dumps(value)
        else:
            out[name] = value
    return out


def record_to_csv(record: dict) -> str:
    flat = flatten(record)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(flat), lineterminator="\n")
    writer.writeheader()
    writer.writerow(flat)
    return buf.getvalue()
