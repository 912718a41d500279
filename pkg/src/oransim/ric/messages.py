"""Typed records exchanged between the simulated O-RAN components.

The O1 / A1 / E2 interfaces are modeled as in-process messages with
reliable, ordered, zero-loss delivery. Every control-plane action appends a
LoopEvent to the shared append-only EventLog; the log's JSON-lines export
is the replayable record the offline choreography validator consumes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from ..kpi import CellId, CongestionRule, KpiSample
from ..splitting import SplitPolicy

__all__ = [
    "EventTag",
    "LoopEvent",
    "EventLog",
    "O1Report",
    "ModelCapabilityQuery",
    "ModelCapabilityReply",
    "A1Deployment",
    "E2ControlRequest",
    "ModelPerformanceFeedback",
    "payload_digest",
]


class EventTag:
    """Event vocabulary of one control cycle, in choreography order."""

    O1_COLLECT = "O1Collect"
    BUS_PUBLISH = "BusPublish"
    CAPABILITY_QUERY = "CapabilityQuery"
    TRAIN_REQUEST = "TrainRequest"
    TRAINED_MODEL = "TrainedModel"
    A1_DEPLOY = "A1Deploy"
    INFERENCE = "Inference"
    ALARM_RAISED = "AlarmRaised"
    E2_CONTROL = "E2Control"
    FEEDBACK = "Feedback"
    RETRAIN = "Retrain"

    ALL = (
        O1_COLLECT,
        BUS_PUBLISH,
        CAPABILITY_QUERY,
        TRAIN_REQUEST,
        TRAINED_MODEL,
        A1_DEPLOY,
        INFERENCE,
        ALARM_RAISED,
        E2_CONTROL,
        FEEDBACK,
        RETRAIN,
    )


def payload_digest(payload) -> str:
    """Short stable digest of a JSON-able payload summary."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class LoopEvent:
    tag: str
    hour: int
    seq: int
    cells: tuple[CellId, ...]
    digest: str

    def to_json_dict(self) -> dict:
        return {
            "seq": self.seq,
            "hour": self.hour,
            "tag": self.tag,
            "cells": [c.to_json() for c in self.cells],
            "digest": self.digest,
        }

    @staticmethod
    def from_json_dict(obj: dict) -> "LoopEvent":
        return LoopEvent(
            tag=str(obj["tag"]),
            hour=int(obj["hour"]),
            seq=int(obj["seq"]),
            cells=tuple(CellId.from_json(c) for c in obj["cells"]),
            digest=str(obj["digest"]),
        )


class EventLog:
    """Append-only, totally ordered record of control-loop events."""

    def __init__(self):
        self._events: list[LoopEvent] = []

    def append(self, tag: str, hour: int, cells=(), payload=None) -> LoopEvent:
        if tag not in EventTag.ALL:
            raise ValueError(f"unknown event tag {tag!r}")
        if self._events and hour < self._events[-1].hour:
            raise ValueError(
                f"event hour {hour} precedes last logged hour {self._events[-1].hour}"
            )
        event = LoopEvent(
            tag=tag,
            hour=hour,
            seq=len(self._events),
            cells=tuple(cells),
            digest=payload_digest(payload if payload is not None else {}),
        )
        self._events.append(event)
        return event

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def __getitem__(self, idx):
        return self._events[idx]

    @property
    def events(self) -> tuple[LoopEvent, ...]:
        return tuple(self._events)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e.to_json_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            for e in self._events
        )

    @staticmethod
    def parse_jsonl(text: str) -> list[LoopEvent]:
        events = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                events.append(LoopEvent.from_json_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"line {line_no}: malformed event record ({exc})") from None
        return events


@dataclass(frozen=True)
class O1Report:
    """Per-cell KPI batches for one fully elapsed reporting window."""

    window_start: int
    window_hours: int
    payload: dict[CellId, tuple[KpiSample, ...]]
    source: tuple[CellId, ...]

    def __post_init__(self):
        if len(set(self.source)) != len(self.source):
            raise ValueError("report source cells must be distinct")
        lo, hi = self.window_start, self.window_start + self.window_hours
        for cell, samples in self.payload.items():
            for s in samples:
                if not (lo <= s.timestamp < hi):
                    raise ValueError(
                        f"sample at hour {s.timestamp} outside window [{lo}, {hi}) "
                        f"for {cell.label()}"
                    )

    @property
    def n_samples(self) -> int:
        return sum(len(v) for v in self.payload.values())


@dataclass(frozen=True)
class ModelCapabilityQuery:
    required_features: tuple[str, ...]
    data_sources: tuple[str, ...]


@dataclass(frozen=True)
class ModelCapabilityReply:
    supported: bool
    capacity: dict = field(default_factory=dict)


@dataclass(frozen=True)
class A1Deployment:
    """Policy plus per-cell serialized forecast models pushed over A1.

    ``models`` maps the target cell to the model file bytes; ``digests``
    carries each blob's content digest so the receiving xApp can skip
    re-parsing unchanged models.
    """

    version: int
    policy: CongestionRule
    models: dict[CellId, bytes]
    digests: dict[CellId, str]

    def __post_init__(self):
        if self.version < 1:
            raise ValueError("deployment version starts at 1")
        if set(self.models) != set(self.digests):
            raise ValueError("models and digests must cover the same cells")

    def to_json_dict(self) -> dict:
        return {
            "version": self.version,
            "policy": {
                "throughput_max": self.policy.throughput_max,
                "prb_min": self.policy.prb_min,
            },
            "models": {
                cell.label(): self.digests[cell] for cell in sorted(self.models)
            },
        }


@dataclass(frozen=True)
class E2ControlRequest:
    """Cell-split control action sent toward the CU/DU over E2."""

    target: CellId
    action: str
    policy: SplitPolicy
    issued_at: int

    def __post_init__(self):
        if self.action != "CellSplit":
            raise ValueError(f"unsupported E2 action {self.action!r}")

    def to_json_dict(self) -> dict:
        return {
            "target": self.target.to_json(),
            "action": self.action,
            "policy": {
                "r_min": self.policy.r_min,
                "r_max": self.policy.r_max,
                "max_factor": self.policy.max_factor,
            },
            "issued_at": self.issued_at,
        }


@dataclass(frozen=True)
class ModelPerformanceFeedback:
    """Inference-host report of one cell's recent forecast accuracy."""

    cell: CellId
    window_accuracy: float
    misprediction: bool

    def __post_init__(self):
        if not (0.0 <= self.window_accuracy <= 100.0):
            raise ValueError(
                f"window_accuracy must be in [0, 100], got {self.window_accuracy}"
            )
