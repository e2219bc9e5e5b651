"""Sample CSV input and output.

Sample files are UTF-8, comma-separated, one sample per row with d numeric
columns, '.' as decimal separator, no index column and an optional header.
A header is recognized when the first non-empty row has a selected field
that does not parse as a number.
"""

from __future__ import annotations

import csv
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ArgumentError, IngestError

_log = logging.getLogger(__name__)


@dataclass
class IngestResult:
    """Samples read from a CSV plus row accounting."""

    samples: np.ndarray
    dropped: int
    filtered: int
    header: list[str] | None
    columns: list[int]


def _parse_float(field: str) -> float | None:
    try:
        value = float(field)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _resolve_column(spec: str | int, header: list[str] | None) -> int:
    if isinstance(spec, int) or str(spec).strip().lstrip("-").isdigit():
        index = int(spec)
        if index < 0:
            raise ArgumentError(f"Column index must be >= 0, got {index}")
        return index
    if header is None:
        raise ArgumentError(f"Column '{spec}' selected by name but the CSV has no header")
    names = [h.strip() for h in header]
    if spec not in names:
        raise ArgumentError(f"Column '{spec}' not in header {names}")
    return names.index(spec)


def ingest_csv(
    path: str | Path,
    feature_columns: Sequence[str | int] | None = None,
    filter_column: str | int | None = None,
    filter_value: str | None = None,
) -> IngestResult:
    """Read selected numeric columns of a CSV into an (s, d) matrix.

    Rows with a missing, non-numeric or non-finite selected field are
    dropped and counted. With ``filter_column``/``filter_value`` only rows
    whose label equals the value are kept (others count as filtered).

    Args:
        path: CSV file
        feature_columns: Column names (needs a header) or zero-based indices;
            all columns when omitted
        filter_column: Optional label column
        filter_value: Label value to keep

    Returns:
        IngestResult

    Raises:
        IngestError: If no valid row remains
        OSError: If the file cannot be read
    """
    with open(path, newline="", encoding="utf-8") as f:
        rows = [row for row in csv.reader(f) if row and any(field.strip() for field in row)]
    if not rows:
        raise IngestError(f"{path} contains no rows")

    first = rows[0]
    header = None
    checked = range(len(first))
    if feature_columns is not None and all(
        isinstance(c, int) or str(c).strip().isdigit() for c in feature_columns
    ):
        checked = [int(c) for c in feature_columns if int(c) < len(first)]
    if any(_parse_float(first[i]) is None for i in checked):
        header = [h.strip() for h in first]
        rows = rows[1:]

    if feature_columns is None:
        columns = list(range(len(first)))
    else:
        columns = [_resolve_column(c, header) for c in feature_columns]
    label = None if filter_column is None else _resolve_column(filter_column, header)

    data = []
    dropped = 0
    filtered = 0
    for row in rows:
        if label is not None:
            if label >= len(row) or row[label].strip() != str(filter_value):
                filtered += 1
                continue
        values = [_parse_float(row[i]) if i < len(row) else None for i in columns]
        if any(v is None for v in values):
            dropped += 1
            continue
        data.append(values)

    if dropped:
        _log.warning("Dropped %d rows of %s with missing or non-numeric fields", dropped, path)
    if not data:
        raise IngestError(f"No valid rows in {path} (dropped {dropped}, filtered {filtered})")
    return IngestResult(np.asarray(data, dtype=np.float64), dropped, filtered, header, columns)


def read_samples_csv(path: str | Path) -> np.ndarray:
    """Read every column of a sample CSV."""
    return ingest_csv(path).samples


def write_samples_csv(samples: np.ndarray, path: str | Path | None = None) -> None:
    """Write samples with full float precision; stdout when path is None."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if path is None:
        np.savetxt(sys.stdout, samples, delimiter=",", fmt="%.17g")
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, samples, delimiter=",", fmt="%.17g")
