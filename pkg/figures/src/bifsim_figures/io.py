"""Reading bifsim CSV files: comment headers, columns, schema checks."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """An input file does not carry the expected schema."""


def read_csv_table(path: str | Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Read one bifsim CSV into (header dict, column arrays).

    Header lines are '# key=value'.  Numeric columns come back as float
    arrays, anything non-numeric as object arrays.
    """
    path = Path(path)
    header: dict[str, str] = {}
    data_lines: list[str] = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                key, sep, value = body.partition("=")
                if sep:
                    header[key.strip()] = value.strip()
            else:
                data_lines.append(line)
    if not data_lines:
        raise SchemaError(f"{path}: no column header row")
    reader = csv.reader(data_lines)
    columns = next(reader)
    raw = {name: [] for name in columns}
    for row in reader:
        if len(row) != len(columns):
            raise SchemaError(f"{path}: ragged row {row!r}")
        for name, cell in zip(columns, row):
            raw[name].append(cell)
    table: dict[str, np.ndarray] = {}
    for name, cells in raw.items():
        try:
            table[name] = np.array([float(c) for c in cells])
        except ValueError:
            table[name] = np.array(cells, dtype=object)
    return header, table


def require_columns(
    table: dict[str, np.ndarray], required: tuple[str, ...], path: str | Path
) -> None:
    for name in required:
        if name not in table:
            raise SchemaError(f"{path}: missing required column {name!r}")


def header_float(header: dict[str, str], key: str, path: str | Path) -> float:
    if key not in header:
        raise SchemaError(f"{path}: missing required header value {key!r}")
    try:
        return float(header[key])
    except ValueError:
        raise SchemaError(f"{path}: header {key!r} is not numeric: {header[key]!r}") from None
