"""Report and CSV emission; byte-stable for identical content."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA = "collar.report/1"


class EmptyTrace(ValueError):
    pass


@dataclass
class Trace:
    columns: tuple
    rows: list

    def __len__(self):
        return len(self.rows)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def emit_csv(trace: Trace, path) -> Path:
    """Header plus one line per row, LF endings, floats at 17 significant digits."""
    if not trace.rows:
        raise EmptyTrace(f"refusing to write an empty trace to {path}")
    width = len(trace.columns)
    for i, row in enumerate(trace.rows):
        if len(row) != width:
            raise ValueError(f"row {i} has {len(row)} fields, expected {width}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace.columns)
        for row in trace.rows:
            w.writerow([_fmt(v) for v in row])
    return path


def jsonable(v):
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


def dumps_report(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_report(report))
    return path
