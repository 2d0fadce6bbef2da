"""
dkmpc CLI Tool

Command-line interface for the experiment pipeline: collect data, train either
model family, track reference paths and aggregate the comparison table.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import orjson
from dotenv import load_dotenv

from .config import RunConfig, load_config, write_default_config
from .data import EpisodeDataset, collect_random_episodes, extract_windows, fit_stats, load_csv, save_csv, split_dataset
from .exceptions import ArgumentError, ArtifactNotFoundError, ConfigurationError, DkmpcError, UsageError
from .koopman import (
    KoopmanModel,
    edmd_fit,
    kmpc_controller,
    load_checkpoint,
    make_rbf_lifting,
    open_loop_rmse,
    save_checkpoint,
    train,
)
from .metrics import ComparisonTable, TrackingReport, make_report
from .mpc import MpcController, run_tracking
from .plant import SoftArmPlant
from .tasks import TRAJECTORY_TASKS, Task, make_reference
from .utils import Timer, dump_json, get_logger, setup_logging

logger = get_logger(__name__)

CONTROLLERS = ("dk", "rbf")
CHECKPOINTS = {"dk": "checkpoint.bin", "rbf": "checkpoint_rbf.bin"}
LOG_LEVEL_ENV = "KOOPCTL_LOG_LEVEL"


def _write_meta(run_dir: Path, name: str, timer: Timer, extra: Optional[Dict] = None) -> Path:
    meta = {
        "command": name,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "runtime_s": timer.elapsed(),
    }
    meta.update(extra or {})
    return dump_json(meta, run_dir / f"meta_{name}.json")


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise ArtifactNotFoundError(str(path), hint)
    return path


def _load_split_dataset(config: RunConfig) -> EpisodeDataset:
    path = _require(config.run_dir / "dataset.csv", "run 'koopctl collect' first")
    return split_dataset(load_csv(path), config.split.ratios, config.seed)


def cmd_collect(config: RunConfig) -> Path:
    """Collect the random-actuation dataset into dataset.csv."""
    with Timer() as timer:
        dataset = collect_random_episodes(
            config.plant_config(),
            config.collect.n_episodes,
            config.collect.steps_per_episode,
            seed=config.seed,
            hold_steps=config.collect.hold_steps,
            workers=config.collect.workers,
        )
        path = save_csv(dataset, config.run_dir / "dataset.csv")
    _write_meta(config.run_dir, "collect", timer, {"tuples": dataset.n_tuples})
    return path


def cmd_train(config: RunConfig, controller: str = "dk") -> Path:
    """Train one model family and write its checkpoint and training report."""
    run_dir = config.run_dir
    dataset = _load_split_dataset(config)
    stats = fit_stats(dataset)
    stats.save_json(run_dir / "stats.json")
    report = {"family": controller, "split_counts": dataset.split_counts(), "seed": config.seed}

    with Timer() as timer:
        if controller == "dk":
            settings = config.train
            model = KoopmanModel.initialize(
                dataset.state_dim,
                dataset.control_dim,
                settings.latent_dim,
                settings.encoder_hidden,
                settings.decoder_hidden,
                seed=config.seed,
                norm_stats=stats,
            )
            model, history = train(model, dataset, settings.to_train_config(config.seed))
            history.save_csv(run_dir / "losses.csv")
            report.update({
                "epochs_run": len(history),
                "best_epoch": history.best_epoch,
                "stopped_early": history.stopped_early,
                "final": history.records[-1].to_dict() if len(history) else None,
            })
        else:
            x_train, _, _ = dataset.transitions("train")
            lifting = make_rbf_lifting(stats.normalize_state(x_train), config.rbf.n_rbf, config.seed)
            model = edmd_fit(dataset, lifting, stats, config.rbf.damping)
            report.update({"n_rbf": lifting.n_rbf, "gamma": lifting.gamma})

    test_windows = extract_windows(dataset.split("test"), config.train.m, stats)
    if len(test_windows):
        report["open_loop_rmse"] = open_loop_rmse(model, test_windows)
        report["open_loop_horizon"] = config.train.m
        logger.info(f"{controller} test {config.train.m}-step open-loop RMSE: {report['open_loop_rmse']:.4e}")

    path = save_checkpoint(model, run_dir / CHECKPOINTS[controller])
    dump_json(report, run_dir / f"train_report_{controller}.json")
    _write_meta(run_dir, f"train_{controller}", timer)
    return path


def _track_one(config: RunConfig, model, controller: str, task: Task) -> TrackingReport:
    reference = make_reference(task, config.tasks, config.plant, config.tracking.settle_ticks)
    mpc_config = config.mpc.build(model, config.plant)
    mpc = kmpc_controller(model, mpc_config) if controller == "rbf" else MpcController(model, mpc_config)
    plant = SoftArmPlant(config.plant_config())

    log = run_tracking(mpc, plant, reference)
    log.save_csv(config.run_dir / f"track_{task.value}_{controller}.csv")
    report = make_report(
        log,
        task.value,
        controller,
        config.seed,
        reference.settle_ticks,
        reference.dwell_ends if task is Task.SQUARE_TARGETS else None,
    )
    report.save(config.run_dir / f"report_{task.value}_{controller}.json")
    logger.info(f"{controller} {task.value}: avg error {report.avg_error:.3f} mm, max {report.max_error:.3f} mm")
    return report


def cmd_track(config: RunConfig, controller: str, tasks: Sequence[Task]) -> List[TrackingReport]:
    """Track each task in closed loop; results are merged in task order."""
    checkpoint = _require(config.run_dir / CHECKPOINTS[controller], f"run 'koopctl train --controller {controller}' first")
    model = load_checkpoint(checkpoint)

    with Timer() as timer:
        if config.tracking.workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=config.tracking.workers) as pool:
                reports = list(pool.map(lambda task: _track_one(config, model, controller, task), tasks))
        else:
            reports = [_track_one(config, model, controller, task) for task in tasks]
    name = "_".join(task.value for task in tasks)
    _write_meta(config.run_dir, f"track_{name}_{controller}", timer)
    return reports


def cmd_targets(config: RunConfig, controller: str) -> TrackingReport:
    """Moving-target square task."""
    return cmd_track(config, controller, [Task.SQUARE_TARGETS])[0]


def cmd_report(config: RunConfig) -> ComparisonTable:
    """Aggregate every report in the run directory into comparison.json / comparison.txt."""
    paths = sorted(config.run_dir.glob("report_*.json"))
    if not paths:
        raise ArtifactNotFoundError(str(config.run_dir / "report_*.json"), "run 'koopctl track' first")
    table = ComparisonTable.from_reports(TrackingReport.load(p) for p in paths)
    dump_json(table.to_dict(), config.run_dir / "comparison.json")
    (config.run_dir / "comparison.txt").write_text(table.to_text())
    return table


def _parse_tasks(name: str) -> List[Task]:
    if name.lower() == "all":
        return list(TRAJECTORY_TASKS)
    try:
        return [Task.parse(name)]
    except ArgumentError as exc:
        raise UsageError(exc.message) from exc


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (default: built-in defaults)")
    common.add_argument("--seed", type=int, help="Override the global seed")
    common.add_argument("--log-level", help=f"Logging level (default: ${LOG_LEVEL_ENV} or INFO)")

    parser = argparse.ArgumentParser(prog="koopctl", description="Deep Koopman MPC experiment pipeline")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    subparsers.add_parser("collect", parents=[common], help="Collect the random-actuation dataset")

    train_parser = subparsers.add_parser("train", parents=[common], help="Train a model family")
    train_parser.add_argument("--controller", choices=CONTROLLERS, default="dk", help="Model family (default: dk)")

    track_parser = subparsers.add_parser("track", parents=[common], help="Track a reference path")
    track_parser.add_argument("--controller", choices=CONTROLLERS, default="dk", help="Controller (default: dk)")
    track_parser.add_argument("--task", default="O", help="O, T, H, U, square or all (default: O)")

    targets_parser = subparsers.add_parser("targets", parents=[common], help="Run the moving-target square task")
    targets_parser.add_argument("--controller", choices=CONTROLLERS, default="dk", help="Controller (default: dk)")

    subparsers.add_parser("report", parents=[common], help="Aggregate reports into the comparison table")

    init_parser = subparsers.add_parser("init-config", help="Write the annotated default configuration")
    init_parser.add_argument("path", nargs="?", default="koopctl.yaml", help="Output file (default: koopctl.yaml)")
    init_parser.add_argument("--force", action="store_true", help="Overwrite an existing file")
    return parser


def _run(args: argparse.Namespace) -> None:
    if args.command == "init-config":
        path = write_default_config(args.path, force=args.force)
        print(f"✅ Wrote default configuration to {path}")
        return

    config = load_config(args.config).with_seed(args.seed)
    if args.command == "collect":
        path = cmd_collect(config)
        print(f"✅ Dataset written to {path}")
    elif args.command == "train":
        path = cmd_train(config, args.controller)
        print(f"✅ {args.controller} checkpoint written to {path}")
    elif args.command == "track":
        for report in cmd_track(config, args.controller, _parse_tasks(args.task)):
            print(f"✅ {report.controller} {report.task}: avg error {report.avg_error:.3f} mm")
    elif args.command == "targets":
        report = cmd_targets(config, args.controller)
        errors = ", ".join(f"{e:.2f}" for e in report.target_errors or [])
        print(f"✅ {report.controller} square targets: steady-state errors [{errors}] mm")
    elif args.command == "report":
        table = cmd_report(config)
        print(table.to_text(), end="")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point"""
    load_dotenv()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2

    level = getattr(args, "log_level", None) or os.getenv(LOG_LEVEL_ENV) or "INFO"
    try:
        setup_logging(level)
    except AttributeError:
        print(f"❌ Error: unknown log level '{level}'", file=sys.stderr)
        return 2

    try:
        _run(args)
    except (UsageError, ConfigurationError, ArtifactNotFoundError) as exc:
        print(f"❌ Error: {exc.message}", file=sys.stderr)
        return 2
    except DkmpcError as exc:
        print(f"❌ Error: {exc.message}", file=sys.stderr)
        return 1
    except orjson.JSONDecodeError as exc:
        print(f"❌ Error: corrupt JSON artifact: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"❌ Error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
