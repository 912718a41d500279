"""Simulated O-RAN control plane: hosts, message choreography, control loop."""

from .hosts import AiServer, CpmXapp, DataBus, DataCollector, NonRtRic
from .loop import ControlLoopConfig, LoopResult, run_control_loop, summarize_run
from .messages import (
    A1Deployment,
    E2ControlRequest,
    EventLog,
    EventTag,
    LoopEvent,
    ModelCapabilityQuery,
    ModelCapabilityReply,
    ModelPerformanceFeedback,
    O1Report,
)
from .validate import ValidationResult, validate_events, validate_jsonl

__all__ = [
    "A1Deployment",
    "AiServer",
    "ControlLoopConfig",
    "CpmXapp",
    "DataBus",
    "DataCollector",
    "E2ControlRequest",
    "EventLog",
    "EventTag",
    "LoopEvent",
    "LoopResult",
    "ModelCapabilityQuery",
    "ModelCapabilityReply",
    "ModelPerformanceFeedback",
    "NonRtRic",
    "O1Report",
    "ValidationResult",
    "run_control_loop",
    "summarize_run",
    "validate_events",
    "validate_jsonl",
]
