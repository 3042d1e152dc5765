"""Plot-ready data emission.

Floats go out with 17 significant digits so a parsed file reproduces the
doubles bit for bit, and an optional header block embeds the resolved
settings, making every file reproducible on its own.  No timestamps or
host details: identical runs must give identical bytes.
"""

from __future__ import annotations

import csv
import json

import numpy as np


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _clean(label: str) -> str:
    return label.replace(" ", "").replace(",", "_")


def _series_layout(result):
    """Column names plus per-record row extraction for a trajectory result."""
    observables = getattr(result, "cfg", None)
    if observables is not None:
        labels = [_clean(op.label or f"op{k}")
                  for k, op in enumerate(result.cfg.observables)]
        mask = result.hermitian_mask
    else:
        first = result[0]
        labels = [f"op{k}" for k in range(len(first.expectations))]
        mask = None
    columns = ["t"]
    for label in labels:
        columns += [f"re_{label}", f"im_{label}"]
    if mask is None:
        var_labels = [f"var{k}" for k in range(len(result[0].variances))]
    else:
        var_labels = [f"var_{lab}" for lab, m in zip(labels, mask) if m]
    columns += var_labels + ["norm_drift", "leak"]
    return columns


def _record_row(rec):
    row = [rec.t]
    for z in rec.expectations:
        row += [z.real, z.imag]
    row += list(rec.variances)
    row += [rec.norm_drift, rec.top_level_leak]
    return row


def emit_series(records, path, format: str = "csv", header: dict | None = None):
    """Write a trajectory series as CSV or JSON lines.

    ``records`` is a trajectory result or a plain list of its records.
    The CSV layout is: t, re/im pair per observable, variances of the
    hermitian observables, norm_drift, leak.
    """
    if len(records) == 0:
        raise ValueError("refusing to emit an empty series")
    columns = _series_layout(records)
    rows = (_record_row(rec) for rec in records)
    _write_table(path, format, header, columns, rows)
    return path


def write_ensemble_series(result, path, format: str = "csv",
                          header: dict | None = None):
    """Ensemble means per tracked observable, with standard errors when known."""
    labels = [_clean(op.label or f"op{k}") for k, op in enumerate(result.observables)]
    columns = ["t"]
    for label in labels:
        columns += [f"re_{label}", f"im_{label}"]
    has_se = result.standard_errors is not None
    if has_se:
        columns += [f"se_{label}" for label in labels]

    def rows():
        for r in range(len(result.times)):
            row = [result.times[r]]
            for j in range(len(labels)):
                z = result.mean_observables[r, j]
                row += [z.real, z.imag]
            if has_se:
                row += [result.standard_errors[r, j] for j in range(len(labels))]
            yield row

    _write_table(path, format, header, columns, rows())
    return path


def write_oracle_series(evolution, observables, path, format: str = "csv",
                        header: dict | None = None):
    """Expectations tr(rho A) along a master-equation evolution."""
    labels = [_clean(op.label or f"op{k}") for k, op in enumerate(observables)]
    columns = ["t"]
    for label in labels:
        columns += [f"re_{label}", f"im_{label}"]
    columns.append("trace")

    def rows():
        for t, rho in evolution:
            row = [t]
            for op in observables:
                z = complex(np.trace(rho.entries @ op.entries))
                row += [z.real, z.imag]
            row.append(complex(np.trace(rho.entries)).real)
            yield row

    _write_table(path, format, header, columns, rows())
    return path


def write_poincare(points, path, format: str = "csv", header: dict | None = None):
    """Stroboscopic section points, one row per sampled period."""
    columns = ["period_index", "re", "im"]
    rows = ([p.period_index, p.re, p.im] for p in points)
    _write_table(path, format, header, columns, rows)
    return path


def _write_table(path, format, header, columns, rows):
    if format == "csv":
        with open(path, "w", newline="") as fh:
            if header:
                for line in json.dumps(header, indent=None).splitlines():
                    fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow(_fmt(v) if isinstance(v, (float, np.floating))
                                else str(v) for v in row)
    elif format == "jsonl":
        with open(path, "w") as fh:
            if header:
                fh.write(json.dumps({"header": header}) + "\n")
            for row in rows:
                obj = {name: (float(v) if isinstance(v, (float, np.floating)) else v)
                       for name, v in zip(columns, row)}
                fh.write(json.dumps(obj) + "\n")
    else:
        raise ValueError(f"unknown output format {format!r}")


def read_series(path):
    """Parse a CSV emitted by this module back into float columns.

    Returns (header dict or None, column names, dict of numpy arrays).
    Exists mostly so tests can check the 17-digit round trip.
    """
    header_lines = []
    with open(path) as fh:
        lines = fh.readlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        header_lines.append(lines[i][1:].strip())
        i += 1
    header = json.loads("\n".join(header_lines)) if header_lines else None
    reader = csv.reader(lines[i:])
    columns = next(reader)
    data = {name: [] for name in columns}
    for row in reader:
        for name, value in zip(columns, row):
            data[name].append(float(value))
    return header, columns, {name: np.array(vals) for name, vals in data.items()}
