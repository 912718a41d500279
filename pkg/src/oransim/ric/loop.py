"""The hour-by-hour control loop tying collection, training, inference, and
cell splitting together.

Each cycle executes the end-to-end flow in a fixed order, which is exactly
what the offline validator checks:

    O1Collect -> BusPublish -> (CapabilityQuery -> TrainRequest ->
    TrainedModel)? -> A1Deploy -> Inference -> (AlarmRaised E2Control?)* ->
    Feedback -> Retrain*

Training runs in the first cycle and again whenever feedback flags cells
below the accuracy threshold (subject to a per-cell retrain cooldown). The
A1 policy/model push is re-issued every cycle with a monotonically
increasing version; unchanged models are recognized by digest at the xApp.
Splits actuate immediately, so the hour being predicted is already served
by the post-split cells (the preemptive remedy).
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..forecast import LstmConfig, TrainingConfig, accuracy
from ..kpi import CongestionRule, KpiSample, congested_hours
from ..network import SimulatedNetwork
from ..splitting import SplitPolicy
from .hosts import AiServer, CpmXapp, DataBus, DataCollector, NonRtRic
from .messages import E2ControlRequest, EventLog, EventTag, ModelPerformanceFeedback

__all__ = ["ControlLoopConfig", "LoopResult", "run_control_loop"]

logger = logging.getLogger(__name__)

CellKey = tuple[int, int]


@dataclass(frozen=True)
class ControlLoopConfig:
    """Cadence, retrain policy, split eligibility, and optional KPI target.

    ``max_congested_hours`` enables early termination: once every active
    cell shows at most that many congested hours over the trailing
    ``target_window_hours``, the loop stops. None runs the full horizon
    (the default, so evaluation windows are comparable to a baseline).
    """

    collection_period: int = 1
    retrain_accuracy_threshold: float = 90.0
    feedback_window_hours: int = 24
    max_congested_hours: int | None = None
    target_window_hours: int = 24
    max_split_factor: int = 2
    split_cooldown_hours: int = 24
    retrain_cooldown_hours: int = 24

    def __post_init__(self):
        if self.collection_period < 1:
            raise ValueError("collection_period must be >= 1")
        if not (0.0 <= self.retrain_accuracy_threshold <= 100.0):
            raise ValueError("retrain_accuracy_threshold must be in [0, 100]")
        if self.feedback_window_hours < 1 or self.target_window_hours < 1:
            raise ValueError("feedback/target windows must be >= 1 hour")
        if self.max_split_factor not in (2, 4, 8):
            raise ValueError("max_split_factor must be one of 2, 4, 8")
        if self.max_congested_hours is not None and self.max_congested_hours < 0:
            raise ValueError("max_congested_hours must be >= 0 when set")
        if self.split_cooldown_hours < 0 or self.retrain_cooldown_hours < 0:
            raise ValueError("cooldowns must be >= 0")


@dataclass
class LoopResult:
    log: EventLog
    network: SimulatedNetwork
    start_hour: int
    end_hour: int
    terminated_early: bool
    deployments: list[dict] = field(default_factory=list)
    e2_requests: list[E2ControlRequest] = field(default_factory=list)
    feedback_history: list[list[ModelPerformanceFeedback]] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)


def _target_met(network: SimulatedNetwork, rule: CongestionRule, cfg: ControlLoopConfig) -> bool:
    for key in network.active_keys():
        cell = network.cells[key]
        n = min(cfg.target_window_hours, cell.n_samples)
        if n == 0:
            continue
        congested = sum(
            1
            for u, t in zip(cell.prb_util[-n:], cell.ip_throughput[-n:])
            if t < rule.throughput_max and u > rule.prb_min
        )
        if congested > cfg.max_congested_hours:
            return False
    return True


def summarize_run(
    network: SimulatedNetwork, rule: CongestionRule, start: int, end: int
) -> dict:
    """Loop-window metrics against the no-action baseline on identical traffic."""
    length = end - start
    baseline = network.baseline_series(start, length)
    after = network.realized_series(start, length)

    def below_threshold_hours(series_list):
        return int(
            sum(
                sum(1 for s in series.samples if s.ip_throughput < rule.throughput_max)
                for series in series_list
            )
        )

    return {
        "window_start": start,
        "window_hours": length,
        "n_cells_baseline": len(baseline),
        "n_cells_after": len(after),
        "congested_hours_baseline": int(sum(congested_hours(s, rule) for s in baseline)),
        "congested_hours_after": int(sum(congested_hours(s, rule) for s in after)),
        "hours_below_threshold_baseline": below_threshold_hours(baseline),
        "hours_below_threshold_after": below_threshold_hours(after),
        "splits_issued": len(network.split_events),
        "max_split_factor_reached": network.max_factor_reached(),
    }


def run_control_loop(
    network: SimulatedNetwork,
    *,
    rule: CongestionRule,
    lstm_cfg: LstmConfig,
    train_cfg: TrainingConfig,
    loop_cfg: ControlLoopConfig,
    split_policy: SplitPolicy,
    horizon_hours: int,
    log: EventLog | None = None,
) -> LoopResult:
    """Advance the scenario ``horizon_hours`` past the pre-realized history.

    Deterministic: (network traffic, configs, seeds) fully determine the
    event log and final state.
    """
    if horizon_hours < loop_cfg.collection_period:
        raise ValueError("horizon must cover at least one collection period")
    if network.hour < loop_cfg.collection_period:
        raise ValueError(
            f"need at least {loop_cfg.collection_period} hours of history, "
            f"network is at hour {network.hour}"
        )
    if network.hour + horizon_hours > network.total_hours:
        raise ValueError(
            f"horizon {horizon_hours} exceeds remaining base traffic "
            f"({network.total_hours - network.hour} hours)"
        )
    if split_policy.max_factor != loop_cfg.max_split_factor:
        raise ValueError(
            f"split policy max_factor {split_policy.max_factor} != loop "
            f"max_split_factor {loop_cfg.max_split_factor}"
        )

    log = log if log is not None else EventLog()
    collector = DataCollector(log)
    bus = DataBus(log)
    ai = AiServer(log)
    non_rt = NonRtRic(log, ai)
    xapp = CpmXapp(log)
    split_rng = split_policy.rng()

    result = LoopResult(
        log=log,
        network=network,
        start_hour=network.hour,
        end_hour=network.hour,
        terminated_early=False,
    )
    predictions: dict[CellKey, list[tuple[int, KpiSample]]] = defaultdict(list)
    pending_retrain: set[CellKey] = set()
    last_train_attempt: dict[CellKey, int] = {}
    training_due = True

    start = network.hour
    end = start + horizon_hours
    hour = start
    while hour < end:
        period = loop_cfg.collection_period
        # (1)(2) collect the last fully elapsed window, publish to non-RT RIC
        report = collector.collect(network, hour - period, period)
        bus.publish(report, hour)
        delivered = bus.consume()
        if delivered is not report:  # simulated bus is in-order and loss-free
            raise RuntimeError("data bus delivery violated ordering")

        # (3)(4) capability query + training when due
        if training_due:
            train_keys = set(pending_retrain)
            train_keys.update(
                k for k in network.active_keys() if not non_rt.has_model(k)
            )
            histories = {k: network.training_history(k) for k in sorted(train_keys)}
            failures = non_rt.train_and_update(histories, lstm_cfg, train_cfg, hour)
            for k in train_keys:
                last_train_attempt[k] = hour
            if failures:
                logger.info("cells excluded from deployment this round: %s", failures)
            pending_retrain.clear()
            training_due = False

        # (5) A1 policy/model push (hourly re-affirmation, new version)
        targets = {k: network.cells[k].cell_id for k in network.active_keys()}
        deployment = non_rt.build_deployment(rule, targets, hour)
        xapp.receive_deployment(deployment)
        result.deployments.append(deployment.to_json_dict())

        # (6) inference for every cell with a model and enough history
        windows = {}
        for key in network.active_keys():
            window = network.trailing_window(key, train_cfg.lookback)
            if window is not None:
                windows[key] = (network.cells[key].cell_id, window)
        inferences = xapp.infer(windows, hour, train_cfg.lookback)
        for key in sorted(inferences):
            predictions[key].append((hour, inferences[key][1]))

        # (7) alarms and the cell-split control action
        alarmed_ids = set()
        for key in sorted(inferences):
            cell_id, pred, alarm = inferences[key]
            if not alarm:
                continue
            xapp.raise_alarm(cell_id, pred, hour)
            alarmed_ids.add(cell_id)
            cell = network.cells[key]
            at_cap = cell_id.split_factor >= loop_cfg.max_split_factor
            cooling = (
                cell.last_split_hour is not None
                and hour - cell.last_split_hour < loop_cfg.split_cooldown_hours
            )
            if at_cap or cooling:
                logger.info(
                    "alarmed cell %s not split (%s)",
                    cell_id.label(),
                    "factor cap" if at_cap else "split cooldown",
                )
                continue
            request = xapp.issue_e2(cell_id, alarmed_ids, split_policy, hour)
            result.e2_requests.append(request)
            event = network.split(key, split_policy, split_rng, hour)
            non_rt.register_child(key, (event.child.enb, event.child.cell))

        # realize this cycle's hours with the post-action topology
        realize_n = min(period, end - hour)
        for _ in range(realize_n):
            network.realize_hour()

        # feedback on the freshly realized actuals
        evaluations = {}
        window_lo = hour + 1 - loop_cfg.feedback_window_hours
        for key in network.active_keys():
            cell = network.cells[key]
            pairs = [
                (pred, cell.prb_util[ph - cell.created_at], cell.ip_throughput[ph - cell.created_at])
                for ph, pred in predictions[key]
                if ph >= window_lo and 0 <= ph - cell.created_at < cell.n_samples
            ]
            if not pairs:
                continue
            pred_arr = np.array([[p.prb_util, p.ip_throughput] for p, _, _ in pairs])
            act_arr = np.array([[u, t] for _, u, t in pairs])
            evaluations[key] = (cell.cell_id, accuracy(pred_arr, act_arr))
        feedbacks = xapp.feedback(evaluations, loop_cfg.retrain_accuracy_threshold, hour)
        result.feedback_history.append(feedbacks)

        flagged: list[CellKey] = []
        for key in sorted(evaluations):
            cell_id, acc = evaluations[key]
            cooled = (
                key not in last_train_attempt
                or hour - last_train_attempt[key] >= loop_cfg.retrain_cooldown_hours
            )
            if acc < loop_cfg.retrain_accuracy_threshold and cooled:
                flagged.append(key)
        # cells with no model yet (e.g. failed earlier) retry on the same cadence
        for key in network.active_keys():
            if non_rt.has_model(key) or key in flagged:
                continue
            if (
                key not in last_train_attempt
                or hour - last_train_attempt[key] >= loop_cfg.retrain_cooldown_hours
            ):
                flagged.append(key)
        if flagged:
            flagged.sort()
            log.append(
                EventTag.RETRAIN,
                hour=hour,
                cells=[network.cells[k].cell_id for k in flagged],
                payload={"cells": [network.cells[k].cell_id.label() for k in flagged]},
            )
            pending_retrain.update(flagged)
            training_due = True

        hour += realize_n
        if loop_cfg.max_congested_hours is not None and _target_met(network, rule, loop_cfg):
            result.terminated_early = True
            break

    result.end_hour = hour
    result.metrics = summarize_run(network, rule, start, hour)
    acc_values = [f.window_accuracy for f in result.feedback_history[-1]] if result.feedback_history else []
    result.metrics["mean_final_accuracy"] = (
        float(np.mean(acc_values)) if acc_values else None
    )
    result.metrics["terminated_early"] = result.terminated_early
    result.metrics["end_hour"] = result.end_hour
    return result
