"""Core KPI vocabulary: cells, hourly KPI series, and the congestion rule.

Every other part of the simulator consumes these types. All of them are
immutable values and all operations here are pure functions, so they are
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CellId",
    "KpiSample",
    "KpiSeries",
    "CongestionRule",
    "evaluate_congestion",
    "window_average",
    "congested_hours",
]


@dataclass(frozen=True, order=True)
class CellId:
    """Identity of one cell: eNB index, cell index, and split generation.

    ``generation`` counts how many split rounds the cell's lineage has gone
    through (0 for cells present at scenario start). A cell's split factor
    is ``2 ** generation``.
    """

    enb: int
    cell: int
    generation: int = 0

    def __post_init__(self):
        if self.enb < 0 or self.cell < 0 or self.generation < 0:
            raise ValueError(f"CellId indices must be >= 0, got {self}")

    @property
    def split_factor(self) -> int:
        return 2 ** self.generation

    def label(self) -> str:
        return f"e{self.enb}c{self.cell}g{self.generation}"

    def to_json(self) -> list[int]:
        return [self.enb, self.cell, self.generation]

    @staticmethod
    def from_json(obj) -> "CellId":
        enb, cell, generation = (int(v) for v in obj)
        return CellId(enb, cell, generation)


@dataclass(frozen=True)
class KpiSample:
    """One hourly measurement for one cell.

    prb_util is the downlink PRB utilization in percent, ip_throughput the
    user-perceived downlink IP throughput in Mbps.
    """

    timestamp: int
    prb_util: float
    ip_throughput: float

    def __post_init__(self):
        if not (0.0 <= self.prb_util <= 100.0):
            raise ValueError(f"prb_util must be in [0, 100], got {self.prb_util}")
        if not (math.isfinite(self.ip_throughput) and self.ip_throughput >= 0.0):
            raise ValueError(
                f"ip_throughput must be finite and >= 0, got {self.ip_throughput}"
            )


@dataclass(frozen=True)
class KpiSeries:
    """Hourly KPI samples for one cell, gap-free and strictly ordered."""

    cell: CellId
    samples: tuple[KpiSample, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for prev, cur in zip(self.samples, self.samples[1:]):
            if cur.timestamp != prev.timestamp + 1:
                raise ValueError(
                    f"samples must be hourly with no gaps: "
                    f"{prev.timestamp} followed by {cur.timestamp}"
                )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def start(self) -> int:
        return self.samples[0].timestamp

    def to_array(self) -> np.ndarray:
        """(N, 2) float64 array with columns (prb_util, ip_throughput)."""
        return np.array(
            [(s.prb_util, s.ip_throughput) for s in self.samples], dtype=np.float64
        ).reshape(len(self.samples), 2)

    @staticmethod
    def from_arrays(
        cell: CellId, start: int, prb_util, ip_throughput
    ) -> "KpiSeries":
        samples = tuple(
            KpiSample(start + i, float(u), float(t))
            for i, (u, t) in enumerate(zip(prb_util, ip_throughput, strict=True))
        )
        return KpiSeries(cell, samples)


@dataclass(frozen=True)
class CongestionRule:
    """Two-threshold AND predicate defining a congested cell.

    Defaults: throughput below 1 Mbps while PRB utilization exceeds 80%.
    Operators may reconfigure both thresholds per their SLA.
    """

    throughput_max: float = 1.0
    prb_min: float = 80.0

    def __post_init__(self):
        if not self.throughput_max > 0:
            raise ValueError(f"throughput_max must be > 0, got {self.throughput_max}")
        if not (0.0 < self.prb_min < 100.0):
            raise ValueError(f"prb_min must be in (0, 100), got {self.prb_min}")


def evaluate_congestion(sample: KpiSample, rule: CongestionRule) -> bool:
    """True iff the sample violates both thresholds (strict inequalities)."""
    return sample.ip_throughput < rule.throughput_max and sample.prb_util > rule.prb_min


def window_average(series: KpiSeries, start: int, length: int) -> tuple[float, float]:
    """Arithmetic mean of (prb_util, ip_throughput) over [start, start+length).

    ``start`` is an absolute hour; the window must lie inside the series.
    """
    if length < 1:
        raise ValueError(f"window length must be >= 1, got {length}")
    if not series.samples:
        raise ValueError("cannot average an empty series")
    lo = start - series.start
    hi = lo + length
    if lo < 0 or hi > len(series.samples):
        raise ValueError(
            f"window [{start}, {start + length}) outside series "
            f"[{series.start}, {series.start + len(series.samples)})"
        )
    chunk = series.samples[lo:hi]
    mean_prb = sum(s.prb_util for s in chunk) / length
    mean_thr = sum(s.ip_throughput for s in chunk) / length
    return mean_prb, mean_thr


def congested_hours(series: KpiSeries, rule: CongestionRule) -> int:
    """Number of samples in the series that evaluate as congested."""
    return sum(1 for s in series.samples if evaluate_congestion(s, rule))
