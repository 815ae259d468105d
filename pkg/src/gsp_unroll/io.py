"""CSV / JSON readers and writers.

Result files are bit-stable: fixed field order, floats written with 17
significant digits, LF line endings.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import DimensionError

SCHEMA_VERSION = 1


@dataclass
class ResultRecord:
    experiment_id: str
    kind: str  # "trial" or "aggregate"
    trial: int | None
    missing_fraction: float
    snr_db: float | None = None
    normalized_error: float | None = None
    normalized_error_std: float | None = None
    f_score: float | None = None
    f_score_std: float | None = None
    stability: float | None = None
    error_covariance_graph: float | None = None
    error_knn_graph: float | None = None
    error_true_graph: float | None = None
    f_score_covariance_graph: float | None = None
    alpha: list | None = None
    seconds: float | None = None
    seed: int | None = None
    status: str = "ok"
    schema_version: int = SCHEMA_VERSION


RECORD_FIELDS = [f.name for f in fields(ResultRecord)]
_INT_FIELDS = {"trial", "seed", "schema_version"}
_STR_FIELDS = {"experiment_id", "kind", "status"}

_NUM_OR_NULL = {"type": ["number", "null"]}
RESULT_JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "records"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": RECORD_FIELDS,
                "additionalProperties": False,
                "properties": {
                    "experiment_id": {"type": "string"},
                    "kind": {"enum": ["trial", "aggregate"]},
                    "trial": {"type": ["integer", "null"]},
                    "missing_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                    "snr_db": _NUM_OR_NULL,
                    "normalized_error": _NUM_OR_NULL,
                    "normalized_error_std": _NUM_OR_NULL,
                    "f_score": _NUM_OR_NULL,
                    "f_score_std": _NUM_OR_NULL,
                    "stability": _NUM_OR_NULL,
                    "error_covariance_graph": _NUM_OR_NULL,
                    "error_knn_graph": _NUM_OR_NULL,
                    "error_true_graph": _NUM_OR_NULL,
                    "f_score_covariance_graph": _NUM_OR_NULL,
                    "alpha": {"type": ["array", "null"], "items": {"type": "number"}},
                    "seconds": _NUM_OR_NULL,
                    "seed": {"type": ["integer", "null"]},
                    "status": {"type": "string"},
                    "schema_version": {"const": SCHEMA_VERSION},
                },
            },
        },
    },
}


def fmt_float(x):
    x = float(x) + 0.0  # folds -0.0 into 0.0
    if not math.isfinite(x):
        raise ValueError(f"refusing to serialize non-finite value {x!r}")
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# data CSV
# ---------------------------------------------------------------------------

_MISSING_TOKENS = {"", "nan", "NaN", "NAN"}


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path):
    """Read a vertices-by-timestamps CSV.

    Returns ``(X, psi)``. Empty cells and ``NaN`` are missing: they read as 0
    in ``X`` and 0 in the mask. A first row containing any non-numeric,
    non-missing cell is treated as a header and skipped.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and any(c.strip() not in _MISSING_TOKENS and not _is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    X = np.zeros((len(rows), width))
    psi = np.ones((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DimensionError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell in _MISSING_TOKENS:
                psi[i, j] = 0.0
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {cell!r} at row {i + 1}, "
                                 f"column {j + 1}") from None
            if math.isnan(value):
                psi[i, j] = 0.0
            else:
                X[i, j] = value
    if width < 2:
        raise DimensionError(f"{path}: need at least two timestamps, got {width}")
    return X, psi


def save_matrix_csv(path, X, psi=None):
    """Write a matrix as CSV; entries with ``psi == 0`` are left empty."""
    X = np.asarray(X, dtype=np.float64)
    lines = []
    for i in range(X.shape[0]):
        cells = [("" if psi is not None and psi[i, j] == 0 else fmt_float(X[i, j]))
                 for j in range(X.shape[1])]
        lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path, text):
    path = Path(path)
    try:
        with path.open("w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------


def _csv_cell(name, v):
    if v is None:
        return ""
    if name == "alpha":
        return ";".join(fmt_float(a) for a in v)
    if name in _STR_FIELDS:
        return str(v)
    if name in _INT_FIELDS:
        return str(int(v))
    return fmt_float(v)


def _json_value(name, v):
    if v is None:
        return "null"
    if name == "alpha":
        return "[" + ", ".join(fmt_float(a) for a in v) + "]"
    if name in _STR_FIELDS:
        return json.dumps(str(v))
    if name in _INT_FIELDS:
        return str(int(v))
    return fmt_float(v)


def emit_results(records, path, format="csv"):
    """Serialize records to ``path`` as CSV (with header) or JSON."""
    if format == "csv":
        buf = [",".join(RECORD_FIELDS)]
        for rec in records:
            d = asdict(rec)
            buf.append(",".join(_csv_cell(k, d[k]) for k in RECORD_FIELDS))
        _write_text(path, "\n".join(buf) + "\n")
    elif format == "json":
        items = []
        for rec in records:
            d = asdict(rec)
            body = ", ".join(f'"{k}": {_json_value(k, d[k])}' for k in RECORD_FIELDS)
            items.append("    {" + body + "}")
        inner = ",\n".join(items)
        text = (f'{{\n  "schema_version": {SCHEMA_VERSION},\n  "records": [\n'
                + (inner + "\n" if items else "") + "  ]\n}\n")
        _write_text(path, text)
    else:
        raise ValueError(f"unknown format {format!r}; expected 'csv' or 'json'")


def _parse_cell(name, cell):
    if cell == "":
        return None
    if name == "alpha":
        return [float(a) for a in cell.split(";")]
    if name in _STR_FIELDS:
        return cell
    if name in _INT_FIELDS:
        return int(cell)
    return float(cell)


def read_results(path):
    """Inverse of :func:`emit_results`; format inferred from the suffix."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        return [ResultRecord(**r) for r in doc["records"]]
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_FIELDS:
            raise ValueError(f"{path}: header does not match the result schema")
        return [ResultRecord(**{k: _parse_cell(k, row[k]) for k in RECORD_FIELDS})
                for row in reader]


def dump_model(path, alpha, laplacian, extra=None):
    """Write trained alpha and a dense Laplacian as JSON."""
    L = np.asarray(laplacian, dtype=np.float64)
    rows = ["[" + ", ".join(fmt_float(v) for v in row) + "]" for row in L]
    parts = [
        f'  "schema_version": {SCHEMA_VERSION}',
        '  "alpha": [' + ", ".join(fmt_float(a) for a in alpha) + "]",
        '  "laplacian": [\n    ' + ",\n    ".join(rows) + "\n  ]",
    ]
    for k, v in (extra or {}).items():
        parts.append(f"  {json.dumps(k)}: {json.dumps(v, sort_keys=True)}")
    _write_text(path, "{\n" + ",\n".join(parts) + "\n}\n")


def load_model(path):
    doc = json.loads(Path(path).read_text())
    return np.asarray(doc["alpha"]), np.asarray(doc["laplacian"])


def load_laplacian_csv(path):
    X, psi = load_csv(path)
    if not np.all(psi == 1):
        raise ValueError(f"{path}: Laplacian file has missing cells")
    return X
