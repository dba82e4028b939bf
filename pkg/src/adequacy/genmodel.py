"""Two-state generating units and the distribution of available conventional capacity.

Each unit delivers its full capacity with its availability probability and
zero otherwise, independently of all other units; the fleet distribution is
the exact discrete convolution of the per-unit two-state distributions on the
1 MW grid.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .pmf import DiscretePmf

# probabilities below this are trimmed during convolution; cumulative trimmed
# mass is tracked and must stay below _TRIM_BUDGET
TRIM_THRESHOLD = 1e-15
_TRIM_BUDGET = 1e-10


@dataclass(frozen=True)
class GeneratingUnit:
    name: str
    capacity_mw: int
    availability: float

    def __post_init__(self):
        if not isinstance(self.capacity_mw, (int, np.integer)) or self.capacity_mw < 1:
            raise ValueError(f"unit {self.name!r}: capacity must be a positive integer MW")
        if not 0.0 < self.availability <= 1.0:
            raise ValueError(f"unit {self.name!r}: availability must lie in (0, 1]")


def convolve_fleet(units, trim_threshold: float = TRIM_THRESHOLD) -> DiscretePmf:
    """Distribution of total available capacity over independent two-state units."""
    units = list(units)
    if not units:
        raise ValueError("empty fleet")
    total = sum(u.capacity_mw for u in units)
    p = np.zeros(total + 1)
    p[0] = 1.0
    top = 0
    trimmed = 0.0
    for unit in units:
        cap, a = unit.capacity_mw, unit.availability
        shifted = p[: top + 1] * a
        p[: top + 1] *= 1.0 - a
        p[cap : top + cap + 1] += shifted
        top += cap
        if trim_threshold > 0.0:
            live = p[: top + 1]
            small = (live > 0.0) & (live < trim_threshold)
            if small.any():
                trimmed += live[small].sum()
                live[small] = 0.0
    if trimmed > _TRIM_BUDGET:
        warnings.warn(
            f"trimmed {trimmed:.3e} probability mass during fleet convolution; "
            "consider a smaller trim threshold"
        )
    return DiscretePmf(0, p / p.sum())


def fleet_summary(units) -> dict:
    units = list(units)
    return {
        "n_units": len(units),
        "total_capacity_mw": sum(u.capacity_mw for u in units),
        "mean_available_mw": sum(u.capacity_mw * u.availability for u in units),
    }


def load_fleet(path) -> list[GeneratingUnit]:
    """Read and validate a fleet CSV with columns name, capacity_mw, availability."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"fleet file not found: {path}")
    units = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"name", "capacity_mw", "availability"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing required columns {sorted(missing)}")
        for row in reader:
            line = reader.line_num
            name = (row.get("name") or "").strip()
            if not name:
                raise DataError(f"line {line}: unit without a name")
            try:
                cap = float(row.get("capacity_mw"))
            except (TypeError, ValueError):
                raise DataError(f"unit {name!r} (line {line}): bad capacity") from None
            # the 1 MW grid is the contract: silent rounding would move LoLE
            if not cap.is_integer() or cap <= 0:
                raise DataError(
                    f"unit {name!r} (line {line}): capacity must be a positive integer MW, "
                    f"got {row.get('capacity_mw')!r}"
                )
            try:
                avail = float(row.get("availability"))
            except (TypeError, ValueError):
                raise DataError(f"unit {name!r} (line {line}): bad availability") from None
            if not 0.0 < avail <= 1.0:
                raise DataError(
                    f"unit {name!r} (line {line}): availability {avail} outside (0, 1]"
                )
            units.append(GeneratingUnit(name, int(cap), avail))
    if not units:
        raise DataError(f"{path}: no units")
    return units
