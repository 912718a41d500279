"""Cell-splitting remedy: load migration, KPI recomputation, and histograms.

A split moves a uniformly drawn fraction R% (default range [60, 75]) of the
congested cell's load to a freshly created cell; the parent keeps the rest.
Both cells advance one split generation, so a cell's split factor is
2**generation and the factor cap bounds how many rounds a lineage can take.

The post-split KPI law is the simplest model consistent with the intent of
the remedy: utilization scales with each cell's share of the pre-split
load, and per-user throughput scales inversely with utilization, capped at
the cell's zero-load throughput. It is isolated in ``apply_split_effects``
so alternative laws can be swapped in.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .kpi import CellId, KpiSeries

__all__ = [
    "SplitPolicy",
    "SplitEvent",
    "CellLoadState",
    "SplitRefusedError",
    "draw_r",
    "split_cell",
    "apply_split_effects",
    "histogram_hours",
    "default_bin_edges",
    "export_histogram_csv",
]


class SplitRefusedError(RuntimeError):
    """Split rejected: the cell already reached the maximum split factor."""


@dataclass(frozen=True)
class SplitPolicy:
    """Bounds of the migration fraction draw and the split-factor cap."""

    r_min: float = 60.0
    r_max: float = 75.0
    max_factor: int = 2
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.r_min <= self.r_max < 100.0):
            raise ValueError(
                f"require 0 < r_min <= r_max < 100, got [{self.r_min}, {self.r_max}]"
            )
        if self.max_factor not in (2, 4, 8):
            raise ValueError(f"max_factor must be one of 2, 4, 8, got {self.max_factor}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed])))


@dataclass(frozen=True)
class SplitEvent:
    """Record of one completed split round."""

    parent: CellId  # identity before the split
    child: CellId
    r: float
    hour: int
    round: int

    def __post_init__(self):
        if self.child.generation != self.parent.generation + 1:
            raise ValueError(
                f"child generation {self.child.generation} must be parent+1 "
                f"({self.parent.generation + 1})"
            )


@dataclass(frozen=True)
class CellLoadState:
    """One cell's offered load (abstract user-population units) and current KPIs."""

    cell: CellId
    load: float
    prb_util: float
    ip_throughput: float
    throughput_cap: float

    def __post_init__(self):
        if self.load < 0:
            raise ValueError(f"load must be >= 0, got {self.load}")
        if not (0.0 <= self.prb_util <= 100.0):
            raise ValueError(f"prb_util must be in [0, 100], got {self.prb_util}")
        if self.throughput_cap <= 0:
            raise ValueError("throughput_cap must be > 0")


def draw_r(policy: SplitPolicy, rng: np.random.Generator) -> float:
    """Uniform migration percentage in [r_min, r_max] from the given stream."""
    if policy.r_min == policy.r_max:
        return policy.r_min
    return float(rng.uniform(policy.r_min, policy.r_max))


def split_cell(
    state: CellLoadState,
    policy: SplitPolicy,
    hour: int,
    rng: np.random.Generator,
    child_cell_index: int,
) -> tuple[CellLoadState, CellLoadState, SplitEvent]:
    """Split one cell: draw R, move R% of the load to a new cell.

    The child takes ``child_cell_index`` (the caller allocates a fresh index
    within the eNB) and both resulting cells carry generation + 1. Load is
    conserved exactly. KPIs on the returned states are still the pre-split
    values; ``apply_split_effects`` recomputes them.
    """
    if state.cell.split_factor >= policy.max_factor:
        raise SplitRefusedError(
            f"{state.cell.label()} already at split factor {state.cell.split_factor} "
            f"(max {policy.max_factor})"
        )
    r = draw_r(policy, rng)
    moved = state.load * (r / 100.0)
    # parent + child must equal the original load bit-exactly
    parent_load = state.load - moved
    child_load = state.load - parent_load
    parent_id = CellId(state.cell.enb, state.cell.cell, state.cell.generation + 1)
    child_id = CellId(state.cell.enb, child_cell_index, state.cell.generation + 1)
    parent = replace(state, cell=parent_id, load=parent_load)
    child = replace(state, cell=child_id, load=child_load)
    event = SplitEvent(state.cell, child_id, r, hour, round=child_id.generation)
    return parent, child, event


def apply_split_effects(
    parent: CellLoadState, child: CellLoadState
) -> tuple[CellLoadState, CellLoadState]:
    """Recompute both cells' KPIs from their shares of the pre-split load.

    prb_util scales with the load share (clamped to [0, 100]); throughput
    scales inversely with utilization, capped at the zero-load throughput.
    The inputs are expected to still carry the shared pre-split KPIs.
    """
    total = parent.load + child.load

    def updated(state: CellLoadState, share: float) -> CellLoadState:
        new_util = min(100.0, state.prb_util * share)
        if new_util > 0:
            new_thr = min(state.throughput_cap, state.ip_throughput * state.prb_util / new_util)
        else:
            new_thr = state.throughput_cap
        return replace(state, prb_util=new_util, ip_throughput=new_thr)

    if total > 0:
        parent_share = parent.load / total
        child_share = child.load / total
    else:
        # degenerate zero-load split: fall back to equal shares
        parent_share = child_share = 0.5
    return updated(parent, parent_share), updated(child, child_share)


def default_bin_edges() -> list[float]:
    """0.5 Mbps-wide bins from 0 to 5 Mbps (an overflow bin is always added)."""
    return [0.5 * i for i in range(11)]


def histogram_hours(
    series_list: list[KpiSeries], bin_edges: list[float] | None = None
) -> dict[CellId, np.ndarray]:
    """Per-cell counts of hours whose IP throughput falls in each bin.

    Bins are half-open [e_i, e_{i+1}); a final overflow bin counts hours at
    or above the last edge (and below the first edge, which cannot occur
    for valid KPI samples with edges starting at 0). Counts always sum to
    the series length.
    """
    edges = default_bin_edges() if bin_edges is None else list(bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing, got {edges}")
    out: dict[CellId, np.ndarray] = {}
    for series in series_list:
        counts = np.zeros(len(edges), dtype=np.int64)  # last slot = overflow
        for s in series.samples:
            idx = np.searchsorted(edges, s.ip_throughput, side="right") - 1
            if 0 <= idx < len(edges) - 1:
                counts[idx] += 1
            else:
                counts[-1] += 1
        out[series.cell] = counts
    return out


def export_histogram_csv(
    histogram: dict[CellId, np.ndarray], bin_edges: list[float] | None = None
) -> bytes:
    """CSV rows (cell, bin_low, bin_high, hours); the overflow bin has bin_high=inf."""
    edges = default_bin_edges() if bin_edges is None else list(bin_edges)
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cell", "bin_low", "bin_high", "hours"])
    for cell in sorted(histogram):
        counts = histogram[cell]
        for i, count in enumerate(counts):
            low = edges[i] if i < len(edges) - 1 else edges[-1]
            high = edges[i + 1] if i < len(edges) - 1 else "inf"
            writer.writerow([cell.label(), low, high, int(count)])
    return buf.getvalue().encode("utf-8")
