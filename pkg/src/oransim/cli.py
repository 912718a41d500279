"""Command-line entry point: generate, train, run, validate.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime error.
All outputs are deterministic functions of the resolved config, so a rerun
with the same master seed is byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, load_config
from .forecast import (
    InsufficientDataError,
    TrainingConfig,
    save_model,
    train,
)
from .network import SimulatedNetwork
from .ric import run_control_loop, validate_jsonl
from .splitting import default_bin_edges, export_histogram_csv, histogram_hours
from .traffic import IngestError, export_csv, generate_synthetic, ingest_csv
from .forecast.training import evaluate_heldout

__all__ = ["main"]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_config_echo(cfg: ScenarioConfig, outdir: Path) -> None:
    _write_json(outdir / "config.json", cfg.to_resolved_dict())


def _per_cell_training_config(cfg: ScenarioConfig, enb: int, cell: int) -> TrainingConfig:
    seed = int(
        np.random.SeedSequence([cfg.training.seed, enb, cell]).generate_state(
            1, dtype=np.uint64
        )[0]
    )
    t = cfg.training
    return TrainingConfig(
        batch_size=t.batch_size,
        epochs=t.epochs,
        adam=t.adam,
        lookback=t.lookback,
        horizon=t.horizon,
        train_fraction=t.train_fraction,
        seed=seed,
    )


def cmd_generate(cfg: ScenarioConfig, outdir: Path) -> int:
    if cfg.profile is None:
        raise ValueError("generate requires synthetic traffic in the config")
    outdir.mkdir(parents=True, exist_ok=True)
    series = generate_synthetic(cfg.profile)
    payload = export_csv(series, cfg.schema)
    (outdir / "dataset.csv").write_bytes(payload)
    _write_config_echo(cfg, outdir)
    _write_json(
        outdir / "manifest.json",
        {
            "n_cells": len(series),
            "n_hours": len(series[0]) if series else 0,
            "n_rows": sum(len(s) for s in series),
            "dataset_sha256": hashlib.sha256(payload).hexdigest(),
        },
    )
    print(f"wrote {len(series)} cells x {len(series[0])} hours to {outdir / 'dataset.csv'}")
    return 0


def cmd_train(cfg: ScenarioConfig, dataset: Path, outdir: Path) -> int:
    series_list = ingest_csv(dataset.read_bytes(), cfg.schema)
    if not series_list:
        raise ValueError(f"dataset {dataset} contains no cells")
    outdir.mkdir(parents=True, exist_ok=True)
    models_dir = outdir / "models"
    models_dir.mkdir(exist_ok=True)
    per_cell: dict[str, float] = {}
    skipped: list[str] = []
    for series in series_list:
        cell_cfg = _per_cell_training_config(cfg, series.cell.enb, series.cell.cell)
        try:
            model, _ = train(series, cfg.lstm, cell_cfg)
        except InsufficientDataError:
            skipped.append(series.cell.label())
            continue
        save_model(model, models_dir / f"{series.cell.label()}.json")
        acc, _ = evaluate_heldout(model, series, cell_cfg)
        per_cell[series.cell.label()] = acc
    if not per_cell:
        raise ValueError("no cell had enough history to train")
    mean_acc = sum(per_cell.values()) / len(per_cell)
    _write_json(
        outdir / "accuracy_report.json",
        {
            "per_cell_accuracy": per_cell,
            "mean_accuracy": mean_acc,
            "n_cells_trained": len(per_cell),
            "skipped_cells": sorted(skipped),
        },
    )
    _write_config_echo(cfg, outdir)
    print(f"trained {len(per_cell)} cells, mean held-out accuracy {mean_acc:.2f}%")
    return 0


def _build_network(cfg: ScenarioConfig) -> SimulatedNetwork:
    if cfg.profile is not None:
        total = cfg.profile.n_hours
        base = generate_synthetic(cfg.profile)
        cap = cfg.profile.throughput_at_zero_load
    else:
        base = ingest_csv(Path(cfg.csv_path).read_bytes(), cfg.schema)
        if not base:
            raise ValueError(f"dataset {cfg.csv_path} contains no cells")
        total = len(base[0])
        cap = max(s.ip_throughput for series in base for s in series.samples)
    history = total - cfg.horizon_hours
    if history < 1:
        raise ValueError(
            f"traffic provides {total} hours, horizon {cfg.horizon_hours} leaves no history"
        )
    return SimulatedNetwork(base, throughput_cap=cap, history_hours=history)


def cmd_run(cfg: ScenarioConfig, outdir: Path) -> int:
    network = _build_network(cfg)
    result = run_control_loop(
        network,
        rule=cfg.rule,
        lstm_cfg=cfg.lstm,
        train_cfg=cfg.training,
        loop_cfg=cfg.loop,
        split_policy=cfg.split,
        horizon_hours=cfg.horizon_hours,
    )
    jsonl = result.log.to_jsonl()
    check = validate_jsonl(jsonl)
    if not check.ok:
        raise RuntimeError(f"internal choreography violation: {check.violation}")

    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "events.jsonl").write_text(jsonl, encoding="utf-8")
    (outdir / "a1_deployments.jsonl").write_text(
        "".join(json.dumps(d, sort_keys=True, separators=(",", ":")) + "\n"
                for d in result.deployments),
        encoding="utf-8",
    )
    (outdir / "e2_requests.jsonl").write_text(
        "".join(json.dumps(r.to_json_dict(), sort_keys=True, separators=(",", ":")) + "\n"
                for r in result.e2_requests),
        encoding="utf-8",
    )
    window = result.end_hour - result.start_hour
    edges = default_bin_edges()
    baseline = network.baseline_series(result.start_hour, window)
    after = network.realized_series(result.start_hour, window)
    (outdir / "histogram_baseline.csv").write_bytes(
        export_histogram_csv(histogram_hours(baseline, edges), edges)
    )
    (outdir / "histogram_after.csv").write_bytes(
        export_histogram_csv(histogram_hours(after, edges), edges)
    )
    _write_json(outdir / "summary.json", result.metrics)
    _write_config_echo(cfg, outdir)
    m = result.metrics
    print(
        f"simulated hours [{result.start_hour}, {result.end_hour}): "
        f"congested hours {m['congested_hours_baseline']} -> {m['congested_hours_after']}, "
        f"{m['splits_issued']} splits, max factor {m['max_split_factor_reached']}"
    )
    return 0


def cmd_validate(events_path: Path) -> int:
    result = validate_jsonl(events_path.read_text(encoding="utf-8"))
    if result.ok:
        print("PASS: event log satisfies the control-loop choreography")
        return 0
    print(f"FAIL: {result.violation}", file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oransim",
        description="Deterministic O-RAN congestion prediction and cell-splitting simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, default=None,
                        help="scenario config JSON (defaults reproduce the reference setup)")
    common.add_argument("-o", "--output", type=Path, default=Path("oransim_out"),
                        help="output directory (default: ./oransim_out)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the master seed")

    sub.add_parser("generate", parents=[common],
                   help="write the synthetic KPI dataset as CSV")
    p_train = sub.add_parser("train", parents=[common],
                             help="train per-cell forecasters on a dataset CSV")
    p_train.add_argument("-d", "--dataset", type=Path, required=True,
                         help="dataset CSV produced by generate (or external)")
    sub.add_parser("run", parents=[common],
                   help="execute the full control loop and emit evaluation outputs")
    p_val = sub.add_parser("validate", help="replay an event log against the choreography rules")
    p_val.add_argument("events", type=Path, help="events.jsonl produced by run")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.events)
        cfg = load_config(args.config, master_seed_override=args.seed)
        if args.command == "generate":
            return cmd_generate(cfg, args.output)
        if args.command == "train":
            return cmd_train(cfg, args.dataset, args.output)
        if args.command == "run":
            return cmd_run(cfg, args.output)
        raise AssertionError(f"unhandled command {args.command}")
    except (ValueError, IngestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
