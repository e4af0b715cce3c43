"""Command line interface for the offloading benchmark."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from offloader.config import RunConfig
from offloader.data import FileTraceSource, SyntheticTraceSource, load_traces, save_traces
from offloader.errors import (
    ConfigError,
    InvariantViolation,
    MissingTracesError,
    OffloaderError,
    TrainingDivergenceError,
)
from offloader.evaluation import benchmark, export_report
from offloader.mdp import Trace
from offloader.policies import (
    AllCloudPolicy,
    AllRobotPolicy,
    BaseOffloadPolicy,
    LearnedPolicy,
    RandomPolicy,
    ThresholdPolicy,
    ThresholdPolicyConfig,
    verify_oracle,
)
from offloader.policies.threshold import calibrate_sweep
from offloader.rl import A2CTrainer, load_checkpoint
from offloader.rl.trainer import write_curve
from offloader.utils.logger import get_logger, setup_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VERIFICATION = 3

SPLITS = ("train", "test")
THRESHOLD_PREFIX = "threshold-q"
HEURISTIC_NAME = "robot-heuristic"

logger = get_logger("cli")


class UsageArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with :data:`EXIT_USAGE`."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- paths --------------------------------------------------------------------


def traces_path(config: RunConfig, split: str) -> Path:
    return Path(config.out_dir) / "traces" / f"{split}.jsonl"


def calibration_path(config: RunConfig) -> Path:
    return Path(config.out_dir) / "calibration.json"


def require_traces(*paths: Path) -> None:
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise MissingTracesError(missing)


# --- config -------------------------------------------------------------------


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides: Dict[str, Any] = {
        "out_dir": str(args.out) if args.out else None,
        "seed": args.seed,
        "trainer.seed": args.seed,
        "jobs": args.jobs,
        "trainer.episodes": args.episodes,
    }
    config = apply_overrides(config, overrides)
    config.validate()
    return config


def apply_overrides(config: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    updates = {key: value for key, value in overrides.items() if value is not None}
    if not updates:
        return config
    return config.copy(**updates)


# --- policies -----------------------------------------------------------------


def load_thresholds(config: RunConfig) -> Dict[float, ThresholdPolicyConfig]:
    """Read calibration.json, or calibrate from the training split when absent."""

    path = calibration_path(config)
    if path.exists():
        data = json.loads(path.read_text(encoding="utf-8"))
        return {
            float(q): ThresholdPolicyConfig(q=float(q), threshold=float(t))
            for q, t in data["thresholds"].items()
        }
    train_file = traces_path(config, "train")
    if not train_file.exists():
        raise MissingTracesError([str(path), str(train_file)])
    return calibrate_sweep(load_traces(train_file), config.bench.threshold_percentiles)


def build_policies(config: RunConfig, checkpoint: Optional[Path] = None) -> List[BaseOffloadPolicy]:
    policies: List[BaseOffloadPolicy] = [
        RandomPolicy(),
        AllRobotPolicy(hold=config.bench.all_robot_hold),
        AllCloudPolicy(),
    ]
    for q, cfg in sorted(load_thresholds(config).items()):
        policies.append(ThresholdPolicy(cfg, name=f"{THRESHOLD_PREFIX}{q:g}"))
    if checkpoint is not None:
        state = load_checkpoint(checkpoint)
        policies.append(LearnedPolicy(state.actor, phi_scale=state.phi_scale))
        logger.info("Loaded RL policy from %s (episode %d)", checkpoint, state.episode)
    return policies


# --- commands -----------------------------------------------------------------


def cmd_gen(args: argparse.Namespace, config: RunConfig) -> int:
    splits = SPLITS if args.split == "both" else (args.split,)
    for split in splits:
        if split == "train":
            source = SyntheticTraceSource(config.generator, config.bench.train_seed_base, config.bench.train_count)
        else:
            source = SyntheticTraceSource(config.generator, config.bench.test_seed_base, config.bench.test_count)
        traces = source.get_traces()
        path = save_traces(traces, traces_path(config, split))
        print(f"Wrote {len(traces)} {split} traces ({source.describe()}) to {path}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace, config: RunConfig) -> int:
    train_file = traces_path(config, "train")
    traces = FileTraceSource(train_file).get_traces()
    sweep = calibrate_sweep(traces, config.bench.threshold_percentiles)
    path = calibration_path(config)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "source": str(train_file),
        "thresholds": {f"{q:g}": cfg.threshold for q, cfg in sorted(sweep.items())},
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    for q, cfg in sorted(sweep.items()):
        print(f"  q={q:g}: threshold {cfg.threshold:.6f}")
    print(f"Calibration written to {path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(config.out_dir)
    checkpoint_path = out / "checkpoint.npz"
    resume = None
    if args.checkpoint is not None:
        resume = load_checkpoint(args.checkpoint)
        print(f"Resuming from {args.checkpoint} at episode {resume.episode}")

    trainer = A2CTrainer(
        config.trainer,
        config.generator,
        config.reward,
        train_seed_base=config.bench.train_seed_base,
        jobs=config.resolved_jobs,
    )
    try:
        result = trainer.train(resume=resume, checkpoint_path=checkpoint_path)
    except TrainingDivergenceError as exc:
        path = out / "divergence.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"error": str(exc), **exc.diagnostics}, indent=2) + "\n", encoding="utf-8")
        print(f"Training diverged: {exc}. Diagnostics written to {path}", file=sys.stderr)
        return EXIT_RUNTIME

    curve = write_curve(result.curve, out / "training_curve.csv")
    window = config.trainer.curve_window
    print("Training complete:\n")
    print(f"  Episodes        : {result.episodes}")
    print(f"  Avg reward ({window}): {result.moving_average(window):.3f}")
    print(f"  Checkpoint      : {checkpoint_path}")
    print(f"  Training curve  : {curve}")
    return EXIT_OK


def cmd_oracle_check(args: argparse.Namespace, config: RunConfig) -> int:
    bench = config.bench
    report = verify_oracle(
        instances=bench.oracle_check_instances,
        max_T=bench.oracle_check_max_T,
        max_budget=bench.oracle_check_max_budget,
        seed=config.seed,
        params=config.reward,
    )
    print(report.summary())
    if report.passed:
        return EXIT_OK

    out = Path(config.out_dir)
    traces_file = save_traces([c.trace for c in report.counterexamples], out / "oracle_counterexamples.jsonl")
    details = [
        {
            "index": c.index,
            "trace": c.trace.trace_id,
            "budget": c.budget,
            "params": asdict(c.params),
            "dp_value": c.dp_value,
            "brute_value": c.brute_value,
        }
        for c in report.counterexamples
    ]
    details_file = out / "oracle_counterexample.json"
    details_file.write_text(json.dumps(details, indent=2) + "\n", encoding="utf-8")
    print(f"Counterexamples written to {details_file} and {traces_file}", file=sys.stderr)
    return EXIT_VERIFICATION


def cmd_bench(args: argparse.Namespace, config: RunConfig) -> int:
    test_file = traces_path(config, "test")
    require_traces(test_file)
    traces: List[Trace] = load_traces(test_file)
    policies = build_policies(config, args.checkpoint)

    bench = config.bench
    report = benchmark(
        policies,
        traces,
        bench.budget_fractions,
        bench.trials,
        config.reward,
        seed=config.seed,
        jobs=config.resolved_jobs,
        oracle_max_horizon=bench.oracle_max_horizon,
    )
    report = report.collapse_variants(THRESHOLD_PREFIX, HEURISTIC_NAME)
    paths = export_report(report, Path(config.out_dir) / "report")

    summary = report.summary()
    overall = summary[summary["fraction"] == "all"]
    print("Benchmark complete:\n")
    for row in overall.itertuples(index=False):
        print(f"  {row.policy:<16} median {row.median:>10.3f}  mean {row.mean:>10.3f} +/- {1.96 * row.se:.3f}")
    if HEURISTIC_NAME in report.variants:
        print(f"\n  {HEURISTIC_NAME} uses q={report.variants[HEURISTIC_NAME]['q']:g}")
    print(f"\nReport written to {paths['readme'].parent}")
    if report.violations:
        print(f"{len(report.violations)} dominance violations", file=sys.stderr)
        return EXIT_VERIFICATION
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "gen": cmd_gen,
    "calibrate": cmd_calibrate,
    "train": cmd_train,
    "oracle-check": cmd_oracle_check,
    "bench": cmd_bench,
}


def build_parser() -> UsageArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Path to TOML or JSON configuration file")
    common.add_argument("--out", type=Path, help="Override the output directory")
    common.add_argument("--seed", type=int, help="Override the run and training seed")
    common.add_argument("--jobs", type=int, help="Worker processes (0 = all cores, 1 = serial reference mode)")
    common.add_argument("--episodes", type=int, help="Override the number of training episodes")
    common.add_argument("--checkpoint", type=Path, help="Checkpoint to resume (train) or evaluate (bench)")
    common.add_argument("-v", "--verbose", action="store_true", help="Enable verbose logging")

    parser = UsageArgumentParser(description="Robot-to-cloud offloading benchmark")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=UsageArgumentParser)

    gen_parser = subparsers.add_parser("gen", parents=[common], help="Generate train or test traces")
    gen_parser.add_argument("--split", choices=[*SPLITS, "both"], default="both", help="Which split to write")
    subparsers.add_parser("calibrate", parents=[common], help="Calibrate confidence thresholds on train traces")
    subparsers.add_parser("train", parents=[common], help="Train the recurrent A2C policy")
    subparsers.add_parser("oracle-check", parents=[common], help="Cross-check the DP oracle by brute force")
    subparsers.add_parser("bench", parents=[common], help="Benchmark every policy on the test traces")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(logging.DEBUG if args.verbose else logging.INFO)

    try:
        config = load_config(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](args, config)
    except MissingTracesError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"Invariant violated: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except (OffloaderError, OSError) as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    raise SystemExit(main())
