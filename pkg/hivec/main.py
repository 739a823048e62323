"""
hivec - command-line entry point for training, evaluation and sweeps.

This module handles:
- Command-line argument parsing (one sub-command per verb)
- Logging configuration
- Output directory resolution
- Converting any hivec error into a diagnostic line and exit code 1

Usage:
    hivec train --config configs/desk.json --agent sac --seeds 0,1 --episodes 300
    hivec eval --config configs/desk.json --checkpoint runs/sac_seed-0.pt
    hivec sweep --config configs/desk.json --agent sac,random \\
        --sweep luav_count --values 2,4,8 --seeds 0,1,2 --episodes 300 --out f3
    hivec export --out f3 --figure f3

Environment:
    HIVEC_OUTPUT_ROOT: Relative --out paths are resolved against this
        directory instead of the working directory.

See Also:
    - hivec.config: Configuration loading and validation
    - hivec.agents.training: train(), evaluate() and checkpoints
    - hivec.services.experiments: Sweep runner and plot-data export
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
from dotenv import load_dotenv

from hivec import __version__
from hivec.agents.baselines import AgentKind
from hivec.agents.networks import AgentError
from hivec.agents.training import evaluate, load_checkpoint, save_checkpoint, train
from hivec.config import ConfigurationError, load_config
from hivec.services.channel import ChannelError
from hivec.services.cost import CostError
from hivec.services.environment import SlotTraceWriter
from hivec.services.experiments import (
    FIGURES,
    SWEEPS,
    ExperimentError,
    ExperimentSpec,
    export_plotdata,
    export_series,
    read_results,
    run_experiment,
)
from hivec.services.scheduler import SchedulingError

logger = logging.getLogger("hivec")

OUTPUT_ROOT_ENV = "HIVEC_OUTPUT_ROOT"

HIVEC_ERRORS = (
    ConfigurationError,
    ChannelError,
    CostError,
    SchedulingError,
    AgentError,
    ExperimentError,
)


def setup_logging(verbose: bool = False) -> None:
    """
    Configure the logging system.

    Args:
        verbose: If True, set log level to DEBUG (per-slot detail).

    Log Format:
        "2024-01-15 17:00:00 | INFO     | hivec.experiments | Message"
    """
    level = logging.DEBUG if verbose else logging.INFO

    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    # Reduce noise from third-party libraries
    logging.getLogger("torch").setLevel(logging.WARNING)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)


# =============================================================================
# Argument Parsing
# =============================================================================


def _int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{value}'")


def _float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{value}'")


def _agent_list(value: str) -> list[AgentKind]:
    try:
        return [AgentKind.parse(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hivec",
        description="hivec - UAV-assisted vehicular edge computing simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  hivec train --config configs/desk.json --agent sac --episodes 300
  hivec eval --config configs/desk.json --checkpoint runs/sac_seed-0.pt
  hivec sweep --agent sac,random --sweep luav_count --values 2,4,8 --out f3
  hivec export --out f3 --figure f3
        """,
    )
    parser.add_argument("--version", action="version", version=f"hivec {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        "-c",
        type=Path,
        default=Path("configs/default.json"),
        help="Path to configuration JSON file (default: configs/default.json)",
    )
    common.add_argument(
        "--out",
        "-o",
        type=Path,
        default=Path("runs"),
        help=f"Output directory; relative paths honour ${OUTPUT_ROOT_ENV} (default: runs)",
    )
    common.add_argument(
        "--seeds",
        type=_int_list,
        default=None,
        help="Comma-separated run seeds (default: the config's rng_seed)",
    )
    common.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Enable verbose/debug logging",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", parents=[common], help="Train agents and save checkpoints")
    p_train.add_argument("--agent", type=_agent_list, default=[AgentKind.SAC],
                         help="Comma-separated agent kinds (default: sac)")
    p_train.add_argument("--episodes", type=int, default=300, help="Training episodes")
    p_train.add_argument("--trace", action="store_true",
                         help="Write a per-slot JSON-lines trace next to the metrics")

    p_eval = sub.add_parser("eval", parents=[common], help="Evaluate a saved checkpoint")
    p_eval.add_argument("--checkpoint", type=Path, required=True, help="Checkpoint file")
    p_eval.add_argument("--episodes", type=int, default=10, help="Evaluation episodes")
    p_eval.add_argument("--trace", action="store_true",
                        help="Write a per-slot JSON-lines trace next to the results")

    p_sweep = sub.add_parser("sweep", parents=[common], help="Run a resumable sweep")
    p_sweep.add_argument("--agent", type=_agent_list,
                         default=[AgentKind.SAC, AgentKind.DQN, AgentKind.NO_PRIORITY,
                                  AgentKind.FIXED_UAV, AgentKind.RANDOM],
                         help="Comma-separated agent kinds (default: all)")
    p_sweep.add_argument("--sweep", choices=SWEEPS, required=True, help="Sweep variable")
    p_sweep.add_argument("--values", type=_float_list, required=True,
                         help="Comma-separated sweep values")
    p_sweep.add_argument("--episodes", type=int, default=300, help="Training episodes per cell")
    p_sweep.add_argument("--workers", type=int, default=1, help="Parallel cell processes")

    p_export = sub.add_parser("export", parents=[common], help="Export plot data from results")
    p_export.add_argument("--figure", choices=sorted(FIGURES), required=True,
                          help="Figure whose sweep is exported")
    p_export.add_argument("--agent", type=_agent_list, default=None,
                          help="Agent kinds the export must cover (enables completeness check)")
    p_export.add_argument("--values", type=_float_list, default=None,
                          help="Sweep values the export must cover")

    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def resolve_output(out: Path) -> Path:
    """Resolve ``out`` against $HIVEC_OUTPUT_ROOT when it is relative."""
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        return Path(root) / out
    return out


# =============================================================================
# Commands
# =============================================================================


def _seeds(args: argparse.Namespace, default: int) -> list[int]:
    return args.seeds if args.seeds else [default]


def _trace_writer(args: argparse.Namespace, path: Path) -> Optional[SlotTraceWriter]:
    if not args.trace:
        return None
    logger.info(f"Tracing slots to {path}")
    return SlotTraceWriter(path)


def cmd_train(args: argparse.Namespace, out: Path) -> None:
    cfg = load_config(args.config)
    out.mkdir(parents=True, exist_ok=True)
    for kind in args.agent:
        for seed in _seeds(args, cfg.rng_seed):
            stem = f"{kind.value}_seed-{seed}"
            trace = _trace_writer(args, out / f"{stem}_trace.jsonl")
            try:
                result = train(cfg, kind, args.episodes, seed=seed, trace=trace)
            finally:
                if trace is not None:
                    trace.close()
            pd.DataFrame([m.as_record() for m in result.metrics]).to_csv(
                out / f"{stem}_metrics.csv", index=False
            )
            save_checkpoint(result.policy, out / f"{stem}.pt")
            logger.info(f"Wrote {out / f'{stem}_metrics.csv'}")


def cmd_eval(args: argparse.Namespace, out: Path) -> None:
    cfg = load_config(args.config)
    policy = load_checkpoint(args.checkpoint, cfg)
    out.mkdir(parents=True, exist_ok=True)
    for seed in _seeds(args, cfg.rng_seed):
        stem = f"{args.checkpoint.stem}_eval_seed-{seed}"
        trace = _trace_writer(args, out / f"{stem}_trace.jsonl")
        try:
            metrics = evaluate(cfg, policy, args.episodes, seed=seed, trace=trace)
        finally:
            if trace is not None:
                trace.close()
        path = out / f"{stem}.csv"
        frame = pd.DataFrame([m.as_record() for m in metrics])
        frame.to_csv(path, index=False)
        logger.info(
            f"Evaluated {policy.kind.value} (seed {seed}): "
            f"completion={frame['completion_rate'].mean():.3f} "
            f"utility={frame['utility'].mean():.3f} -> {path}"
        )


def _sweep_spec(args: argparse.Namespace, out: Path, sweep: str,
                agents: list[AgentKind], values: list[float], seeds: list[int]) -> ExperimentSpec:
    return ExperimentSpec(
        base_config=args.config,
        agents=agents,
        sweep=sweep,
        values=values,
        seeds=seeds,
        episodes=getattr(args, "episodes", 1),
        output_dir=out,
        workers=getattr(args, "workers", 1),
    )


def cmd_sweep(args: argparse.Namespace, out: Path) -> None:
    cfg = load_config(args.config)
    spec = _sweep_spec(args, out, args.sweep, args.agent, args.values,
                       _seeds(args, cfg.rng_seed))
    results = run_experiment(spec)
    logger.info(f"{len(results)} cells in {spec.results_path}")


def cmd_export(args: argparse.Namespace, out: Path) -> None:
    results = read_results(out / "results.csv")
    sweep = FIGURES[args.figure]
    spec = None
    if args.agent and args.values and args.seeds:
        spec = _sweep_spec(args, out, sweep, args.agent, args.values, args.seeds)
    table = export_plotdata(results, args.figure, spec)
    path = out / f"plotdata_{args.figure}.csv"
    table.to_csv(path, index=False)
    logger.info(f"Wrote {path}")
    if spec is not None:
        series_path = out / f"series_{args.figure}.csv"
        export_series(spec).to_csv(series_path, index=False)
        logger.info(f"Wrote {series_path}")


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "export": cmd_export,
}


def main(argv: Optional[Sequence[str]] = None) -> None:
    """
    Main entry point.

    Returns:
        None on success, or exits with code 1 on any hivec error.
    """
    load_dotenv()
    args = parse_args(argv)
    setup_logging(args.verbose)

    out = resolve_output(args.out)
    logger.info(f"hivec {__version__}: {args.command} -> {out.absolute()}")

    try:
        COMMANDS[args.command](args, out)
    except HIVEC_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        sys.exit(1)
    except OSError as e:
        logger.error(f"I/O error: {e}")
        sys.exit(1)
    return None


if __name__ == "__main__":
    main()
