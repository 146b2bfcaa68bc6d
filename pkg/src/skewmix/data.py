"""In-memory container for a numeric dataset with cell-level missingness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class DataMatrix:
    """n x p numeric data with a boolean observation mask.

    ``values`` holds NaN wherever ``mask`` is False (missing); ``mask`` is True
    for observed cells. Every row must keep at least one observed cell, and
    observed entries must be finite.
    """

    values: np.ndarray
    mask: np.ndarray
    column_names: list[str] | None = field(default=None)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        self.mask = np.array(self.mask, dtype=bool)
        if self.values.ndim != 2:
            raise DataError("values must be a 2-d array")
        if self.values.shape != self.mask.shape:
            raise DataError("values and mask shapes differ")
        n, p = self.values.shape
        if n < 1 or p < 1:
            raise DataError("need at least one row and one column")
        empty = np.where(~self.mask.any(axis=1))[0]
        if empty.size:
            raise DataError(f"row {empty[0]} has no observed cells")
        bad = ~np.isfinite(self.values[self.mask])
        if bad.any():
            rows, cols = np.where(self.mask & ~np.isfinite(self.values))
            raise DataError(
                f"non-finite observed value at row {rows[0]}, column {cols[0]}"
            )
        # keep the missing cells at NaN regardless of what the caller passed
        self.values = self.values.copy()
        self.values[~self.mask] = np.nan
        if self.column_names is not None and len(self.column_names) != p:
            raise DataError("column_names length does not match column count")

    @classmethod
    def from_values(cls, values, column_names=None) -> "DataMatrix":
        """Build from an array using NaN as the missing-cell marker."""
        values = np.array(values, dtype=float)
        return cls(values=values, mask=~np.isnan(values), column_names=column_names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def complete(self) -> bool:
        return bool(self.mask.all())
