"""Report envelopes and CSV field exports."""
from __future__ import annotations

import csv
import hashlib
import json

import numpy as np

from . import __version__
from .validators import jsonable

REPORT_VERSION = 1
CSV_COLUMNS = ("x", "y", "z", "vx", "vy", "vz")

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "linefib report",
    "type": "object",
    "required": ["tool", "version", "report_version", "command", "config", "seed", "options",
                 "checks", "exit_code"],
    "additionalProperties": False,
    "properties": {
        "tool": {"const": "linefib"},
        "version": {"type": "string"},
        "report_version": {"const": REPORT_VERSION},
        "command": {"enum": ["validate", "gauss", "base", "pushoff", "contact", "classify",
                             "export", "homotopy"]},
        "config": {"type": "object", "required": ["schema_version", "generator"]},
        "seed": {"type": "integer"},
        "options": {"type": "object"},
        "checks": {"type": "object", "minProperties": 1},
        "exit_code": {"enum": [0, 1, 3]},
        "timings": {"type": "object",
                    "additionalProperties": {"type": "number", "minimum": 0}},
    },
}


def envelope(command, config, seed, options, checks, exit_code, timings=None):
    """Versioned report: tool version, config echo, seed, options and one
    entry per check.  ``timings`` is only included when given, since it
    differs between runs."""
    out = {
        "tool": "linefib",
        "version": __version__,
        "report_version": REPORT_VERSION,
        "command": command,
        "config": config,
        "seed": seed,
        "options": options,
        "checks": checks,
        "exit_code": exit_code,
    }
    if timings is not None:
        out["timings"] = timings
    return jsonable(out)


def dumps(report) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, no NaN."""
    return json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _fmt(v):
    return format(float(v), ".17g")


def write_field_csv(fh, X, V):
    """Rows ``x,y,z,vx,vy,vz`` with 17 significant digits; failed
    evaluations have ``nan`` field components."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for x, v in zip(np.asarray(X, dtype=float), np.asarray(V, dtype=float)):
        w.writerow([_fmt(c) for c in (*x, *v)])


def read_field_csv(fh):
    """Inverse of :func:`write_field_csv`; returns ``(X, V)``."""
    r = csv.reader(fh)
    header = next(r)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    rows = np.array([[float(c) for c in row] for row in r], dtype=float).reshape(-1, 6)
    return rows[:, :3], rows[:, 3:]
