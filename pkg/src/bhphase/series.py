"""Time-stamped observable records shared by the exact and ensemble engines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io


@dataclass
class ObservableSeries:
    """Named observable columns on a common time grid.

    Column values are per-particle where that is the natural normalization
    (populations, Bloch components); see the producing engine for the exact
    column naming.  Standard-error companions use the ``<name>_se`` suffix.
    """

    times: np.ndarray
    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for name, col in self.columns.items():
            col = np.asarray(col, dtype=float)
            if col.shape != self.times.shape:
                raise ValueError(f"column {name!r} length does not match times")
            self.columns[name] = col

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    @property
    def names(self):
        return list(self.columns)

    def to_csv(self, path):
        io.write_csv(
            path,
            ["time", *self.columns],
            [self.times, *self.columns.values()],
            meta=self.meta,
        )

    @classmethod
    def from_csv(cls, path) -> "ObservableSeries":
        meta, header, columns = io.read_csv(path)
        times = columns.pop(header[0])
        return cls(times=times, columns=columns, meta=meta)
