"""Simulated control-plane hosts: SMO collector, data bus, AI server, RICs.

Each host is a small state machine invoked sequentially by the control
loop's scheduler. They share one EventLog and append their step's event
when they act, which is what gives the log its per-cycle choreography.
"""

from __future__ import annotations

import hashlib
import logging

import numpy as np

from ..forecast import (
    ForecastModel,
    InsufficientDataError,
    LstmConfig,
    TrainingConfig,
    model_from_json,
    model_to_json,
    predict_from_window,
    train,
)
from ..kpi import CellId, CongestionRule, KpiSample, KpiSeries, evaluate_congestion
from ..network import SimulatedNetwork
from ..splitting import SplitPolicy
from .messages import (
    A1Deployment,
    E2ControlRequest,
    EventLog,
    EventTag,
    ModelCapabilityQuery,
    ModelCapabilityReply,
    ModelPerformanceFeedback,
    O1Report,
)

__all__ = ["DataCollector", "DataBus", "AiServer", "NonRtRic", "CpmXapp"]

logger = logging.getLogger(__name__)

CellKey = tuple[int, int]


class DataCollector:
    """SMO-side collector gathering RAN counters over O1."""

    def __init__(self, log: EventLog):
        self.log = log

    def collect(self, network: SimulatedNetwork, window_start: int, window_hours: int) -> O1Report:
        """Report every active cell's samples for a fully elapsed window."""
        if window_start + window_hours > network.hour:
            raise ValueError(
                f"window [{window_start}, {window_start + window_hours}) not yet elapsed "
                f"(network at hour {network.hour})"
            )
        payload: dict[CellId, tuple[KpiSample, ...]] = {}
        for key in network.active_keys():
            cell_id = network.cells[key].cell_id
            payload[cell_id] = tuple(network.window(key, window_start, window_hours))
        report = O1Report(
            window_start=window_start,
            window_hours=window_hours,
            payload=payload,
            source=tuple(sorted(payload)),
        )
        self.log.append(
            EventTag.O1_COLLECT,
            hour=window_start + window_hours,
            cells=report.source,
            payload={"window_start": window_start, "window_hours": window_hours,
                     "n_samples": report.n_samples},
        )
        return report


class DataBus:
    """Reliable in-order bus between the collector and the non-RT RIC."""

    def __init__(self, log: EventLog):
        self.log = log
        self._queue: list[O1Report] = []

    def publish(self, report: O1Report, hour: int) -> None:
        self._queue.append(report)
        self.log.append(
            EventTag.BUS_PUBLISH,
            hour=hour,
            cells=report.source,
            payload={"window_start": report.window_start, "n_samples": report.n_samples},
        )

    def consume(self) -> O1Report | None:
        if not self._queue:
            return None
        return self._queue.pop(0)


class AiServer:
    """Training host inside the SMO with a fixed capability set."""

    SUPPORTED_FEATURES = frozenset(
        {"recurrent-training", "float64", "multivariate-regression"}
    )
    SUPPORTED_DATA_SOURCES = frozenset({"prb_util", "ip_throughput"})
    CAPACITY = {"max_parallel_jobs": 8, "float_width_bits": 64}

    def __init__(self, log: EventLog):
        self.log = log

    def negotiate(self, query: ModelCapabilityQuery, hour: int) -> ModelCapabilityReply:
        supported = set(query.required_features) <= self.SUPPORTED_FEATURES and set(
            query.data_sources
        ) <= self.SUPPORTED_DATA_SOURCES
        self.log.append(
            EventTag.CAPABILITY_QUERY,
            hour=hour,
            payload={
                "required": sorted(query.required_features),
                "sources": sorted(query.data_sources),
                "supported": supported,
            },
        )
        return ModelCapabilityReply(supported=supported, capacity=dict(self.CAPACITY))

    def train_cells(
        self,
        histories: dict[CellKey, KpiSeries],
        lstm_cfg: LstmConfig,
        train_cfg: TrainingConfig,
    ) -> tuple[dict[CellKey, ForecastModel], list[CellKey]]:
        """Train one model per requested cell, in key order.

        Cells whose history cannot support training are excluded and
        returned as failures. Per-cell seeds derive from the configured
        seed and the cell key, so retrains are reproducible.
        """
        models: dict[CellKey, ForecastModel] = {}
        failures: list[CellKey] = []
        for key in sorted(histories):
            seed = int(
                np.random.SeedSequence([train_cfg.seed, key[0], key[1]]).generate_state(
                    1, dtype=np.uint64
                )[0]
            )
            cell_cfg = TrainingConfig(
                batch_size=train_cfg.batch_size,
                epochs=train_cfg.epochs,
                adam=train_cfg.adam,
                lookback=train_cfg.lookback,
                horizon=train_cfg.horizon,
                train_fraction=train_cfg.train_fraction,
                seed=seed,
            )
            try:
                model, _ = train(histories[key], lstm_cfg, cell_cfg)
            except InsufficientDataError as exc:
                logger.warning("training skipped for cell %s: %s", key, exc)
                failures.append(key)
                continue
            models[key] = model
        return models, failures


class NonRtRic:
    """Non-RT RIC: owns the model cache, versioning, and A1 deployments."""

    REQUIRED_FEATURES = ("recurrent-training", "float64")
    DATA_SOURCES = ("prb_util", "ip_throughput")

    def __init__(self, log: EventLog, ai_server: AiServer):
        self.log = log
        self.ai = ai_server
        self.version = 0
        self._serialized: dict[CellKey, bytes] = {}
        self._digests: dict[CellKey, str] = {}
        self._capabilities_ok = False

    def has_model(self, key: CellKey) -> bool:
        return key in self._serialized

    def ensure_capabilities(self, hour: int) -> ModelCapabilityReply:
        query = ModelCapabilityQuery(self.REQUIRED_FEATURES, self.DATA_SOURCES)
        reply = self.ai.negotiate(query, hour)
        if not reply.supported:
            raise RuntimeError("AI server does not support the required model features")
        self._capabilities_ok = True
        return reply

    def train_and_update(
        self,
        histories: dict[CellKey, KpiSeries],
        lstm_cfg: LstmConfig,
        train_cfg: TrainingConfig,
        hour: int,
    ) -> list[CellKey]:
        """Run the capability query plus training round; cache the results.

        Returns the cells whose training failed (they keep any prior model).
        """
        self.ensure_capabilities(hour)
        ids = [histories[k].cell for k in sorted(histories)]
        self.log.append(
            EventTag.TRAIN_REQUEST,
            hour=hour,
            cells=ids,
            payload={"cells": [c.label() for c in ids]},
        )
        models, failures = self.ai.train_cells(histories, lstm_cfg, train_cfg)
        for key, model in models.items():
            blob = model_to_json(model).encode("utf-8")
            self._serialized[key] = blob
            self._digests[key] = hashlib.sha256(blob).hexdigest()[:16]
        trained_ids = [histories[k].cell for k in sorted(models)]
        self.log.append(
            EventTag.TRAINED_MODEL,
            hour=hour,
            cells=trained_ids,
            payload={
                "digests": {histories[k].cell.label(): self._digests[k] for k in sorted(models)},
                "failed": [histories[k].cell.label() for k in sorted(failures)],
            },
        )
        return failures

    def register_child(self, parent_key: CellKey, child_key: CellKey) -> None:
        """Seed a freshly split cell with a copy of its parent's model."""
        if parent_key in self._serialized:
            self._serialized[child_key] = self._serialized[parent_key]
            self._digests[child_key] = self._digests[parent_key]

    def build_deployment(
        self, policy: CongestionRule, targets: dict[CellKey, CellId], hour: int
    ) -> A1Deployment:
        """Package the current model set for the target cells; bump version."""
        if not self._capabilities_ok:
            raise RuntimeError("capability negotiation must precede deployment")
        self.version += 1
        models = {
            cell_id: self._serialized[key]
            for key, cell_id in sorted(targets.items())
            if key in self._serialized
        }
        digests = {
            cell_id: self._digests[key]
            for key, cell_id in sorted(targets.items())
            if key in self._digests
        }
        deployment = A1Deployment(self.version, policy, models, digests)
        self.log.append(
            EventTag.A1_DEPLOY,
            hour=hour,
            cells=tuple(sorted(models)),
            payload=deployment.to_json_dict(),
        )
        return deployment


class CpmXapp:
    """Congestion prediction and mitigation xApp on the near-RT RIC."""

    def __init__(self, log: EventLog):
        self.log = log
        self.deployment: A1Deployment | None = None
        self._models: dict[CellKey, ForecastModel] = {}
        self._digests: dict[CellKey, str] = {}

    def receive_deployment(self, deployment: A1Deployment) -> None:
        """Activate a deployment; deserialize only new or changed models."""
        if self.deployment is not None and deployment.version <= self.deployment.version:
            raise ValueError(
                f"deployment version must increase: {deployment.version} after "
                f"{self.deployment.version}"
            )
        for cell_id, blob in deployment.models.items():
            key = (cell_id.enb, cell_id.cell)
            digest = deployment.digests[cell_id]
            if self._digests.get(key) != digest:
                self._models[key] = model_from_json(blob.decode("utf-8"))
                self._digests[key] = digest
        self.deployment = deployment

    def model_for(self, key: CellKey) -> ForecastModel | None:
        return self._models.get(key)

    def infer(
        self,
        windows: dict[CellKey, tuple[CellId, np.ndarray]],
        hour: int,
        lookback: int,
    ) -> dict[CellKey, tuple[CellId, KpiSample, bool]]:
        """Predict hour ``hour`` per cell and evaluate the alarm predicate.

        ``windows`` maps each inferable cell to (current id, trailing raw
        window). Cells without a deployed model are skipped.
        """
        if self.deployment is None:
            raise RuntimeError("no active A1 deployment")
        results: dict[CellKey, tuple[CellId, KpiSample, bool]] = {}
        for key in sorted(windows):
            cell_id, window = windows[key]
            model = self._models.get(key)
            if model is None:
                continue
            if window.shape[0] != lookback:
                raise ValueError(
                    f"window for {cell_id.label()} has {window.shape[0]} hours, "
                    f"expected {lookback}"
                )
            pred = predict_from_window(model, window, hour)
            alarm = evaluate_congestion(pred, self.deployment.policy)
            results[key] = (cell_id, pred, alarm)
        self.log.append(
            EventTag.INFERENCE,
            hour=hour,
            cells=[results[k][0] for k in sorted(results)],
            payload={
                results[k][0].label(): [results[k][1].prb_util, results[k][1].ip_throughput]
                for k in sorted(results)
            },
        )
        return results

    def raise_alarm(self, cell_id: CellId, prediction: KpiSample, hour: int) -> None:
        self.log.append(
            EventTag.ALARM_RAISED,
            hour=hour,
            cells=(cell_id,),
            payload={"prediction": [prediction.prb_util, prediction.ip_throughput]},
        )

    def issue_e2(
        self,
        cell_id: CellId,
        alarmed: set[CellId],
        policy: SplitPolicy,
        hour: int,
    ) -> E2ControlRequest:
        """One CellSplit request for an alarmed, eligible cell."""
        if cell_id not in alarmed:
            raise ValueError(
                f"E2 control requested for non-alarmed cell {cell_id.label()}"
            )
        if cell_id.split_factor >= policy.max_factor:
            raise ValueError(
                f"cell {cell_id.label()} already at split factor cap {policy.max_factor}"
            )
        request = E2ControlRequest(cell_id, "CellSplit", policy, hour)
        self.log.append(
            EventTag.E2_CONTROL, hour=hour, cells=(cell_id,), payload=request.to_json_dict()
        )
        return request

    def feedback(
        self,
        evaluations: dict[CellKey, tuple[CellId, float]],
        threshold: float,
        hour: int,
    ) -> list[ModelPerformanceFeedback]:
        """Report per-cell window accuracy; flag cells below the threshold.

        An empty feedback window means no prediction/actual pair exists for
        any cell, so the loop has nothing to monitor: that is an error.
        """
        if not evaluations:
            raise ValueError("empty feedback window: no prediction/actual pairs")
        feedbacks = []
        for key in sorted(evaluations):
            cell_id, acc = evaluations[key]
            feedbacks.append(
                ModelPerformanceFeedback(cell_id, acc, misprediction=acc < threshold)
            )
        self.log.append(
            EventTag.FEEDBACK,
            hour=hour,
            cells=[f.cell for f in feedbacks],
            payload={f.cell.label(): f.window_accuracy for f in feedbacks},
        )
        return feedbacks
