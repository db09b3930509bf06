"""Observational data matrices: loading, validation, standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Base class for data loading/validation failures."""


class CellParseError(DataError):
    pass


class RaggedRowError(DataError):
    pass


class NonFiniteError(DataError):
    pass


class DimensionError(DataError):
    pass


@dataclass(frozen=True)
class DataMatrix:
    """n x d matrix of real observations with named columns."""

    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if v.ndim != 2:
            raise DimensionError(f"expected 2-d array, got shape {v.shape}")
        n, d = v.shape
        if n < 2:
            raise DimensionError(f"need at least 2 samples, got {n}")
        if d < 2:
            raise DimensionError(f"need at least 2 variables, got {d}")
        if len(self.column_names) != d:
            raise DimensionError(
                f"{len(self.column_names)} column names for {d} columns"
            )
        if len(set(self.column_names)) != d:
            raise DataError("column names are not unique")
        if not np.all(np.isfinite(v)):
            r, c = np.argwhere(~np.isfinite(v))[0]
            raise NonFiniteError(f"non-finite value at row {r}, column {c}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def load_csv(path: str, has_header: bool = False) -> DataMatrix:
    """Load a comma-separated numeric table ('.' decimal, UTF-8, no quoting).

    Errors carry the offending row/column (1-based rows as in the file,
    header row included).
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DimensionError(f"{path}: empty file")

    names: tuple[str, ...] | None = None
    start = 0
    if has_header:
        names = tuple(s.strip() for s in lines[0].split(","))
        start = 1

    rows: list[list[float]] = []
    width: int | None = None
    for idx, ln in enumerate(lines[start:], start=start + 1):
        cells = ln.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise RaggedRowError(
                f"{path}: row {idx} has {len(cells)} cells, expected {width}"
            )
        row = []
        for col, cell in enumerate(cells):
            try:
                row.append(float(cell))
            except ValueError:
                raise CellParseError(
                    f"{path}: non-numeric cell {cell!r} at row {idx}, column {col}"
                ) from None
        rows.append(row)

    if not rows:
        raise DimensionError(f"{path}: no data rows")
    values = np.array(rows, dtype=np.float64)
    n, d = values.shape
    if d < 2:
        raise DimensionError(f"{path}: need at least 2 columns, got {d}")
    if n < 2:
        raise DimensionError(f"{path}: need at least 2 rows, got {n}")
    if not np.all(np.isfinite(values)):
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteError(
            f"{path}: non-finite value at row {int(r) + start + 1}, column {int(c)}"
        )
    if names is None:
        names = tuple(f"x{i}" for i in range(d))
    return DataMatrix(values, names)


def save_csv(data: DataMatrix, path: str, with_header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if with_header:
            fh.write(",".join(data.column_names) + "\n")
        for row in data.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def standardize(data: DataMatrix) -> DataMatrix:
    """Per-column zero mean, unit standard deviation (population convention).

    Constant columns map to all-zeros rather than raising.
    """
    v = data.values
    mean = v.mean(axis=0)
    std = v.std(axis=0)  # population convention: divide by n
    out = np.zeros_like(v)
    ok = std > 0
    out[:, ok] = (v[:, ok] - mean[ok]) / std[ok]
    return DataMatrix(out, data.column_names)
