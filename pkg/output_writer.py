#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Output writer
Deterministic CSV/JSON files for tables, profiles, fields and reports,
and comparison against stored golden files.
"""

import csv
import enum
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from mixlayer_types import GoldenNotFound, InvalidDoc, OutputError, Profile, SchemaMismatch

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"


class DocKind(enum.Enum):
    TABLE = "table"
    PROFILE = "profile"
    FIELD = "field"
    STREAMLINES = "streamlines"
    REPORT = "report"


@dataclass
class OutputDoc:
    """
    Named columns of equal length plus string metadata.

    Columns are numeric arrays, or lists of strings for note/label columns.
    ``footer`` is written as the last comment line of a CSV file.
    """

    kind: DocKind
    columns: Dict[str, Sequence]
    metadata: Dict[str, str] = field(default_factory=dict)
    footer: Optional[str] = None

    def __post_init__(self):
        if not self.columns:
            raise InvalidDoc("document has no columns")
        lengths = {name: len(col) for name, col in self.columns.items()}
        if len(set(lengths.values())) > 1:
            raise InvalidDoc(f"column lengths differ: {lengths}")
        self.metadata = {str(k): _meta_value(v) for k, v in self.metadata.items()}

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values())))

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise SchemaMismatch(f"column '{name}' not present (have {list(self.columns)})")
        return np.asarray(self.columns[name])


def _meta_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    return FLOAT_FORMAT % float(value)


def _json_cell(value):
    if isinstance(value, str) or value is None:
        return value
    value = float(value)
    return value if math.isfinite(value) else None


def _has_nonfinite(doc: OutputDoc) -> bool:
    for col in doc.columns.values():
        arr = np.asarray(col)
        if arr.dtype.kind in "fc" and not np.all(np.isfinite(arr)):
            return True
    return False


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def render_csv(doc: OutputDoc) -> str:
    buf = io.StringIO()
    meta = dict(doc.metadata)
    meta['kind'] = doc.kind.value
    for key in sorted(meta):
        buf.write(f"# {key}={meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = list(doc.columns)
    writer.writerow(names)
    cols = [doc.columns[n] for n in names]
    for i in range(doc.n_rows):
        writer.writerow([_cell(col[i]) for col in cols])
    if doc.footer:
        buf.write(f"# {doc.footer}\n")
    return buf.getvalue()


def render_json(doc: OutputDoc) -> str:
    meta = dict(doc.metadata)
    meta['kind'] = doc.kind.value
    if _has_nonfinite(doc):
        meta['nonfinite'] = "null"
    payload = {
        'metadata': meta,
        'columns': {name: [_json_cell(v) for v in col] for name, col in doc.columns.items()},
        'column_order': list(doc.columns),
        'footer': doc.footer,
    }
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write_text(path: str, text: str):
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e
    logger.info("wrote %s", path)


def write_csv(doc: OutputDoc, path: str):
    _write_text(path, render_csv(doc))


def write_json(doc: OutputDoc, path: str):
    _write_text(path, render_json(doc))


def write_doc(doc: OutputDoc, out_dir: str, stem: str, fmt: str = "csv") -> str:
    """Write ``doc`` as <out_dir>/<stem>.<fmt> and return the path."""
    if fmt not in ("csv", "json"):
        raise OutputError(f"unknown output format '{fmt}' (csv or json)")
    path = os.path.join(out_dir, f"{stem}.{fmt}")
    (write_csv if fmt == "csv" else write_json)(doc, path)
    return path


# ---------------------------------------------------------------------------
# Readers
# ---------------------------------------------------------------------------

def _parse_cell(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _column_array(values: List):
    if all(isinstance(v, float) for v in values):
        return np.array(values, dtype=float)
    return values


def read_csv(path: str) -> OutputDoc:
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            lines = f.read().splitlines()
    except FileNotFoundError as e:
        raise GoldenNotFound(f"{path} does not exist") from e
    except OSError as e:
        raise OutputError(f"cannot read {path}: {e}") from e

    meta, body, footer = {}, [], None
    # comment lines are the metadata block above the header row and one footer line at the end
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) > 1 and lines[-1].startswith("#"):
        footer = lines.pop()[1:].strip()
    start = 0
    while start < len(lines) and (lines[start].startswith("#") or not lines[start].strip()):
        text = lines[start][1:].strip()
        if "=" in text:
            key, value = text.split("=", 1)
            meta[key.strip()] = value.strip()
        start += 1
    body = [line for line in lines[start:] if line.strip()]
    if not body:
        raise InvalidDoc(f"{path} has no header row")
    rows = list(csv.reader(body))
    names = rows[0]
    data = {name: _column_array([_parse_cell(r[i]) for r in rows[1:]]) for i, name in enumerate(names)}
    kind = DocKind(meta.pop('kind', DocKind.TABLE.value))
    return OutputDoc(kind, data, meta, footer)


def read_json(path: str) -> OutputDoc:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except FileNotFoundError as e:
        raise GoldenNotFound(f"{path} does not exist") from e
    except (OSError, ValueError) as e:
        raise OutputError(f"cannot read {path}: {e}") from e
    meta = dict(payload.get('metadata', {}))
    kind = DocKind(meta.pop('kind', DocKind.TABLE.value))
    meta.pop('nonfinite', None)
    columns = payload['columns']
    order = payload.get('column_order') or sorted(columns)
    data = {}
    for name in order:
        values = [math.nan if v is None else v for v in columns[name]]
        data[name] = _column_array([float(v) if isinstance(v, (int, float)) else v for v in values])
    return OutputDoc(kind, data, meta, payload.get('footer'))


def read_doc(path: str) -> OutputDoc:
    return read_json(path) if path.endswith(".json") else read_csv(path)


# ---------------------------------------------------------------------------
# Golden comparison
# ---------------------------------------------------------------------------

def compare_golden(produced: OutputDoc, golden_path: str, tolerances: Mapping[str, float],
                   key_column: Optional[str] = None) -> Dict:
    """
    Per-column deviation of ``produced`` against a stored golden file.

    Only columns named in ``tolerances`` are compared (absolute tolerance).
    With ``key_column`` rows are matched by that column's values, otherwise by position.

    Returns:
        dict with 'success', 'columns' (per-column max_abs, max_rel, worst_row, passed)
        and 'message'
    """
    if not os.path.exists(golden_path):
        raise GoldenNotFound(
            f"golden file {golden_path} not found; write one with write_csv from a trusted run")
    golden = read_doc(golden_path)

    if key_column is not None:
        keys = [_cell(k) for k in produced.column(key_column)]
        index = {k: i for i, k in enumerate(keys)}
        missing = [k for k in (_cell(v) for v in golden.column(key_column)) if k not in index]
        if missing:
            raise SchemaMismatch(f"rows {missing} of the golden file are missing from the output")
        rows = [index[_cell(k)] for k in golden.column(key_column)]
    else:
        if produced.n_rows != golden.n_rows:
            raise SchemaMismatch(f"row count {produced.n_rows} != golden {golden.n_rows}")
        rows = list(range(produced.n_rows))

    report, failures = {}, []
    for name, tol in tolerances.items():
        got = np.asarray(produced.column(name), dtype=float)[rows]
        want = np.asarray(golden.column(name), dtype=float)
        diff = np.abs(got - want)
        diff = np.where(np.isnan(diff), np.inf, diff)
        worst = int(np.argmax(diff))
        max_abs = float(diff[worst])
        rel = diff / np.maximum(np.abs(want), 1e-300)
        passed = max_abs <= tol
        report[name] = {'max_abs': max_abs, 'max_rel': float(np.max(rel)),
                        'worst_row': worst, 'passed': passed}
        if not passed:
            failures.append(f"column '{name}' row {worst}: |{got[worst]:.9g} - {want[worst]:.9g}| "
                            f"= {max_abs:.3g} > {tol:g}")
    if failures:
        message = "; ".join(failures)
        logger.warning("golden comparison against %s failed: %s", golden_path, message)
    else:
        message = f"{len(report)} columns within tolerance of {golden_path}"
    return {'success': not failures, 'columns': report, 'message': message}


# ---------------------------------------------------------------------------
# Document builders
# ---------------------------------------------------------------------------

def profile_doc(profile: Profile, metadata: Optional[Mapping] = None) -> OutputDoc:
    """tau, Phi, Phi', Phi'' columns with the termination as footer."""
    return OutputDoc(
        DocKind.PROFILE,
        {'tau': profile.tau, 'phi': profile.phi, 'dphi': profile.dphi, 'ddphi': profile.ddphi},
        dict(metadata or {}),
        footer=profile.termination.describe(),
    )


def table_doc(rows: Sequence[Mapping], names: Sequence[str], metadata: Optional[Mapping] = None) -> OutputDoc:
    """Rows of dicts to a table document; missing values become NaN."""
    columns = {}
    for name in names:
        values = [row.get(name) for row in rows]
        if all(v is None or isinstance(v, (int, float)) for v in values):
            columns[name] = np.array([math.nan if v is None else float(v) for v in values])
        else:
            columns[name] = ["" if v is None else str(v) for v in values]
    return OutputDoc(DocKind.TABLE, columns, dict(metadata or {}))


def report_doc(report: Mapping, metadata: Optional[Mapping] = None) -> OutputDoc:
    """Flat key/value report as a two-column document."""
    keys = sorted(report)
    return OutputDoc(DocKind.REPORT, {'key': keys, 'value': [_cell_any(report[k]) for k in keys]},
                     dict(metadata or {}))


def _cell_any(value) -> str:
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return str(value)
    if isinstance(value, (int, float)):
        return FLOAT_FORMAT % value
    return json.dumps(value, sort_keys=True, default=str)
