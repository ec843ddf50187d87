"""Report emission: sweep CSV, fits JSON, run manifest.

Numbers are serialized in shortest round-trip decimal form, so parsing
an emitted CSV reproduces the in-memory table exactly. All files are
written atomically (temp file + rename) and deterministically: the same
table yields the same bytes. The manifest timestamp honors
SOURCE_DATE_EPOCH for reproducible runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from datetime import datetime, timezone

from . import __version__
from .errors import UsageError
from .scaling import InequalityCheck, ScalingFit, SweepRow

CSV_COLUMNS = ("family", "k", "lambda", "functional", "parameter",
               "value", "error_estimate", "grid_meta")


def _fmt_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow((row.family, row.degree, _fmt_float(row.lam),
                         row.functional, row.parameter,
                         _fmt_float(row.value),
                         _fmt_float(row.error_estimate), row.grid_meta))
    return buf.getvalue()


def write_csv(path: str, rows) -> None:
    atomic_write(path, rows_to_csv(rows))


def read_csv(path: str) -> list[SweepRow]:
    """Parse a sweep CSV back into rows (seed and error are not stored)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise UsageError(f"{path}: empty CSV")
            if tuple(header) != CSV_COLUMNS:
                raise UsageError(
                    f"{path}: unexpected CSV header {header}; expected "
                    + ",".join(CSV_COLUMNS))
            rows = []
            for record in reader:
                if not record:
                    continue
                if len(record) != len(CSV_COLUMNS):
                    raise UsageError(
                        f"{path}: row with {len(record)} fields: {record}")
                family, k, lam, functional, parameter, value, err, meta = record
                rows.append(SweepRow(family, int(k), float(lam), functional,
                                     parameter, float(value), float(err),
                                     meta))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")
    if not rows:
        raise UsageError(f"{path}: CSV contains no data rows")
    return rows


def _json_value(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _json_value(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_value(v) for v in obj]
    return obj


def fit_record(fit: ScalingFit) -> dict:
    return _json_value({
        "kind": "scaling_fit",
        "functional": fit.functional,
        "exponent": fit.exponent,
        "stderr": fit.stderr,
        "reference": fit.reference,
        "verdict": fit.verdict,
        "points": [list(p) for p in fit.points],
        "residuals": list(fit.residuals),
    })


def check_record(check: InequalityCheck) -> dict:
    return _json_value({
        "kind": "inequality_check",
        "name": check.name,
        "degrees": list(check.degrees),
        "lhs": list(check.lhs),
        "rhs": list(check.rhs),
        "constant": check.constant,
        "holds": check.holds,
        "reference": check.reference,
        "meta": check.meta,
    })


def write_json(path: str, payload: dict) -> None:
    atomic_write(path, json.dumps(_json_value(payload), indent=2,
                                  sort_keys=True, allow_nan=False) + "\n")


def run_timestamp() -> str:
    """ISO-8601 UTC; SOURCE_DATE_EPOCH pins it for reproducible runs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        try:
            when = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
        except (ValueError, OverflowError):
            raise UsageError(f"bad SOURCE_DATE_EPOCH value {epoch!r}")
    else:
        when = datetime.now(tz=timezone.utc)
    return when.replace(microsecond=0).isoformat()


def manifest(config_hash: str, command: str, outputs) -> dict:
    return {
        "version": __version__,
        "config_hash": config_hash,
        "timestamp": run_timestamp(),
        "command": command,
        "outputs": sorted(outputs),
    }
