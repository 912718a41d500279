"""Offline replay checker for control-loop event logs.

Walks an exported (or in-memory) event sequence and verifies the per-cycle
choreography plus the cross-cycle safety rules:

  - every cycle is exactly  O1Collect, BusPublish, [CapabilityQuery,
    TrainRequest, TrainedModel], A1Deploy, Inference,
    (AlarmRaised [E2Control])*, Feedback, Retrain* ,
    all at the same hour;
  - an E2Control always follows an AlarmRaised for the same cell within
    the cycle;
  - no A1Deploy before the first TrainedModel;
  - sequence numbers strictly increase and hours never go backwards.

An empty log is vacuously valid.
"""

from __future__ import annotations

from dataclasses import dataclass

from .messages import EventLog, EventTag, LoopEvent

__all__ = ["ValidationResult", "validate_events", "validate_jsonl"]


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violation: str | None = None
    seq: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def _fail(event: LoopEvent, reason: str) -> ValidationResult:
    return ValidationResult(False, f"event seq={event.seq} ({event.tag}): {reason}", event.seq)


def validate_events(events) -> ValidationResult:
    events = list(events)
    if not events:
        return ValidationResult(True)

    for prev, cur in zip(events, events[1:]):
        if cur.seq <= prev.seq:
            return _fail(cur, f"sequence number must exceed {prev.seq}")
        if cur.hour < prev.hour:
            return _fail(cur, f"hour {cur.hour} precedes previous hour {prev.hour}")

    i = 0
    n = len(events)
    seen_trained_model = False
    while i < n:
        ev = events[i]
        if ev.tag != EventTag.O1_COLLECT:
            return _fail(ev, "cycle must start with O1Collect")
        cycle_hour = ev.hour
        i += 1

        def take(expected: str):
            nonlocal i
            if i >= n:
                return None, ValidationResult(
                    False, f"log ends mid-cycle: expected {expected}", events[-1].seq
                )
            ev = events[i]
            if ev.tag != expected:
                return None, _fail(ev, f"expected {expected}")
            if ev.hour != cycle_hour:
                return None, _fail(ev, f"hour {ev.hour} differs from cycle hour {cycle_hour}")
            i += 1
            return ev, None

        _, err = take(EventTag.BUS_PUBLISH)
        if err is not None:
            return err

        if i < n and events[i].tag == EventTag.CAPABILITY_QUERY:
            for tag in (EventTag.CAPABILITY_QUERY, EventTag.TRAIN_REQUEST, EventTag.TRAINED_MODEL):
                _, err = take(tag)
                if err is not None:
                    return err
            seen_trained_model = True

        deploy, err = take(EventTag.A1_DEPLOY)
        if err is not None:
            return err
        if not seen_trained_model:
            return _fail(deploy, "A1Deploy precedes any TrainedModel")

        _, err = take(EventTag.INFERENCE)
        if err is not None:
            return err

        alarmed: set = set()
        while i < n and events[i].tag in (EventTag.ALARM_RAISED, EventTag.E2_CONTROL):
            ev = events[i]
            if ev.hour != cycle_hour:
                return _fail(ev, f"hour {ev.hour} differs from cycle hour {cycle_hour}")
            if len(ev.cells) != 1:
                return _fail(ev, "alarm/control events must name exactly one cell")
            if ev.tag == EventTag.ALARM_RAISED:
                alarmed.add(ev.cells[0])
            else:
                if ev.cells[0] not in alarmed:
                    return _fail(
                        ev,
                        f"E2Control for {ev.cells[0].label()} without a prior "
                        f"AlarmRaised in this cycle",
                    )
            i += 1

        _, err = take(EventTag.FEEDBACK)
        if err is not None:
            return err

        while i < n and events[i].tag == EventTag.RETRAIN:
            if events[i].hour != cycle_hour:
                return _fail(events[i], "Retrain hour differs from cycle hour")
            i += 1

    return ValidationResult(True)


def validate_jsonl(text: str) -> ValidationResult:
    """Validate an exported JSON-lines event log."""
    try:
        events = EventLog.parse_jsonl(text)
    except ValueError as exc:
        return ValidationResult(False, str(exc), None)
    return validate_events(events)
