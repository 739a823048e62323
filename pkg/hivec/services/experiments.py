"""
Experiment runner: sweeps, persisted results and plot-data export.

An experiment is the full factorial agent x sweep value x seed. Each cell
trains one agent from scratch and reduces its per-episode series to
final-window means (the last 20% of episodes). Results go to one CSV file
per experiment, one row per cell, plus one per-episode series file per cell.

Key Features:
    - Resumable: cells already present in results.csv are skipped
    - Parallel cells on a process pool, rows appended by a single writer
    - Every row carries the config hash, the seed and the code version
    - Plot-data export with mean and unbiased std per (agent, value)

Architecture:
    - ExperimentSpec: What to run
    - run_experiment_async(): Schedules cells and owns the results writer
    - run_experiment(): Synchronous wrapper used by the CLI
    - export_plotdata() / export_series(): Column tables for external plotting

Output layout:
    <output_dir>/results.csv
    <output_dir>/series/<agent>_<sweep>-<value>_seed-<seed>.csv

Example:
    >>> spec = ExperimentSpec(
    ...     base_config=Path("configs/desk.json"),
    ...     agents=[AgentKind.SAC, AgentKind.RANDOM],
    ...     sweep="luav_count",
    ...     values=[2, 4, 8],
    ...     seeds=[0, 1, 2, 3, 4],
    ...     episodes=300,
    ...     output_dir=Path("runs/f3"),
    ... )
    >>> results = run_experiment(spec)
    >>> table = export_plotdata(results, "f3", spec)

See Also:
    - hivec.agents.training: train() runs each cell
    - hivec.main: The sweep and export CLI verbs
"""

import asyncio
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import pandas as pd

from hivec import __version__
from hivec.agents.baselines import AgentKind
from hivec.agents.training import EpisodeMetrics, train
from hivec.config import SimConfig, config_hash, load_config, validate_config

logger = logging.getLogger("hivec.experiments")

RESULTS_FILE = "results.csv"
SERIES_DIR = "series"
FINAL_WINDOW = 0.2

SWEEPS = ("luav_count", "vehicle_count", "huav_bandwidth")
FIGURES = {"f3": "luav_count", "f4": "vehicle_count", "f5": "huav_bandwidth"}
METRICS = ("completion_rate", "mean_delay", "total_energy", "utility")
RESULT_COLUMNS = (
    "key", "agent", "sweep", "value", "seed", "episodes",
    "config_hash", "code_version", *METRICS,
)

SweepValue = Union[int, float]


# =============================================================================
# Exceptions
# =============================================================================


class ExperimentError(Exception):
    """Base exception for experiment errors (invalid specs, unwritable output)."""

    pass


class ResultsFileError(ExperimentError):
    """Raised when an existing results file cannot be parsed."""

    pass


class MissingCellsError(ExperimentError):
    """Raised when an export needs cells the results do not contain."""

    def __init__(self, missing: Sequence[str]) -> None:
        self.missing = list(missing)
        super().__init__(f"{len(self.missing)} missing cells: {', '.join(self.missing)}")


# =============================================================================
# Data Classes
# =============================================================================


@dataclass
class ExperimentSpec:
    """
    One experiment: agents x sweep values x seeds.

    Attributes:
        base_config: JSON config every cell starts from.
        agents: Agent kinds to compare.
        sweep: One of luav_count, vehicle_count, huav_bandwidth (Hz).
        values: Sweep values.
        seeds: Distinct run seeds.
        episodes: Training episodes per cell.
        output_dir: Where results.csv and series/ are written.
        workers: Parallel cell processes; 1 runs cells in order in-process.
    """

    base_config: Optional[Path]
    agents: list[AgentKind]
    sweep: str
    values: list[SweepValue]
    seeds: list[int]
    episodes: int
    output_dir: Path
    workers: int = 1

    def __post_init__(self) -> None:
        if self.sweep not in SWEEPS:
            raise ExperimentError(f"sweep must be one of {', '.join(SWEEPS)}, got '{self.sweep}'")
        if not self.values:
            raise ExperimentError("sweep values must not be empty")
        if not self.seeds:
            raise ExperimentError("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ExperimentError(f"seeds must be distinct, got {self.seeds}")
        if not self.agents:
            raise ExperimentError("agents must not be empty")
        if self.episodes < 1:
            raise ExperimentError(f"episodes must be >= 1, got {self.episodes}")
        if self.workers < 1:
            raise ExperimentError(f"workers must be >= 1, got {self.workers}")
        self.values = [normalise_value(self.sweep, v) for v in self.values]
        self.output_dir = Path(self.output_dir)

    def cells(self) -> list["Cell"]:
        return [
            Cell(agent=a, sweep=self.sweep, value=v, seed=s)
            for a in self.agents
            for v in self.values
            for s in self.seeds
        ]

    @property
    def results_path(self) -> Path:
        return self.output_dir / RESULTS_FILE


@dataclass(frozen=True)
class Cell:
    """One (agent, sweep value, seed) combination."""

    agent: AgentKind
    sweep: str
    value: SweepValue
    seed: int

    @property
    def key(self) -> str:
        return f"{self.agent.value}|{self.sweep}={self.value}|seed={self.seed}"

    @property
    def series_name(self) -> str:
        value = re.sub(r"[^0-9A-Za-z.]+", "_", str(self.value))
        return f"{self.agent.value}_{self.sweep}-{value}_seed-{self.seed}.csv"


@dataclass
class CellResult:
    """Row and per-episode series of one finished cell."""

    row: dict[str, Any]
    series: list[dict[str, Any]] = field(default_factory=list)


# =============================================================================
# Sweeps and Cells
# =============================================================================


def normalise_value(sweep: str, value: SweepValue) -> SweepValue:
    """Counts are integers, bandwidths floats."""
    if sweep in ("luav_count", "vehicle_count"):
        if float(value) != int(float(value)):
            raise ExperimentError(f"{sweep} values must be whole numbers, got {value}")
        return int(float(value))
    return float(value)


def apply_sweep(cfg: SimConfig, sweep: str, value: SweepValue) -> SimConfig:
    """Return a validated copy of ``cfg`` with the sweep variable set."""
    if sweep == "luav_count":
        cfg = replace(cfg, network=replace(cfg.network, num_luavs=int(value)))
    elif sweep == "vehicle_count":
        cfg = replace(cfg, network=replace(cfg.network, num_vehicles=int(value)))
    elif sweep == "huav_bandwidth":
        cfg = replace(
            cfg,
            channel=replace(cfg.channel, bandwidth_huav_access=float(value),
                            bandwidth_huav_backhaul=float(value)),
        )
    else:
        raise ExperimentError(f"Unknown sweep variable '{sweep}'")
    # Derived normalisers depend on the counts, so recompute them.
    cfg = replace(cfg, reward=replace(cfg.reward, delay_scale=None, energy_scale=None))
    return validate_config(cfg)


def final_window_means(metrics: Sequence[EpisodeMetrics]) -> dict[str, float]:
    """Means of the tracked metrics over the last 20% of episodes (at least one)."""
    if not metrics:
        return {m: math.nan for m in METRICS}
    n = max(1, math.ceil(FINAL_WINDOW * len(metrics)))
    window = pd.DataFrame([m.as_record() for m in metrics[-n:]])
    return {m: float(window[m].mean()) for m in METRICS}


def run_cell(base_config: Optional[Path], cell: Cell, episodes: int) -> CellResult:
    """Train one cell from scratch. Runs in a worker process when parallel."""
    cfg = apply_sweep(load_config(base_config), cell.sweep, cell.value)
    result = train(cfg, cell.agent, episodes, seed=cell.seed)
    row = {
        "key": cell.key,
        "agent": cell.agent.value,
        "sweep": cell.sweep,
        "value": cell.value,
        "seed": cell.seed,
        "episodes": episodes,
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        **final_window_means(result.metrics),
    }
    return CellResult(row=row, series=[m.as_record() for m in result.metrics])


# =============================================================================
# Results File
# =============================================================================


def read_results(path: Path) -> pd.DataFrame:
    """
    Load a results file; a missing file is an empty table.

    Raises:
        ResultsFileError: If the file is unparsable or lacks result columns.
    """
    if not path.exists():
        return pd.DataFrame(columns=list(RESULT_COLUMNS))
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ResultsFileError(f"Corrupt results file {path}: {e}") from e
    missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if missing:
        raise ResultsFileError(f"Results file {path} lacks columns: {', '.join(missing)}")
    if frame["key"].isna().any() or frame["key"].duplicated().any():
        raise ResultsFileError(f"Results file {path} has empty or duplicate cell keys")
    return frame


def _append_row(path: Path, row: dict[str, Any]) -> None:
    frame = pd.DataFrame([row], columns=list(RESULT_COLUMNS))
    frame.to_csv(path, mode="a", header=not path.exists(), index=False)


def _write_series(output_dir: Path, cell_result: CellResult, name: str) -> None:
    pd.DataFrame(cell_result.series).to_csv(output_dir / SERIES_DIR / name, index=False)


# =============================================================================
# Runner
# =============================================================================


async def _writer(
    queue: "asyncio.Queue[Optional[tuple[Cell, CellResult]]]", spec: ExperimentSpec
) -> int:
    written = 0
    while True:
        item = await queue.get()
        if item is None:
            queue.task_done()
            return written
        cell, cell_result = item
        try:
            _write_series(spec.output_dir, cell_result, cell.series_name)
            _append_row(spec.results_path, cell_result.row)
        finally:
            queue.task_done()
        written += 1
        logger.info(
            f"Cell {cell.key} done: completion={cell_result.row['completion_rate']:.3f} "
            f"utility={cell_result.row['utility']:.3f}"
        )


async def run_experiment_async(spec: ExperimentSpec) -> pd.DataFrame:
    """
    Run every missing cell of ``spec`` and return the full results table.

    Raises:
        ExperimentError: If the output directory cannot be created.
        ResultsFileError: If an existing results file is corrupt.
    """
    try:
        (spec.output_dir / SERIES_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExperimentError(f"Cannot write to {spec.output_dir}: {e}") from e

    done = set(read_results(spec.results_path)["key"])
    pending = [c for c in spec.cells() if c.key not in done]
    skipped = len(spec.cells()) - len(pending)
    if skipped:
        logger.info(f"Skipping {skipped} completed cells")
    logger.info(f"Running {len(pending)} cells with {spec.workers} worker(s)")

    queue: asyncio.Queue = asyncio.Queue()
    writer = asyncio.create_task(_writer(queue, spec))
    loop = asyncio.get_running_loop()
    try:
        if spec.workers == 1:
            for cell in pending:
                result = run_cell(spec.base_config, cell, spec.episodes)
                await queue.put((cell, result))
                # The row must be on disk before the next cell starts.
                await queue.join()
                if writer.done():
                    await writer
        else:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:

                async def _run(cell: Cell) -> tuple[Cell, CellResult]:
                    result = await loop.run_in_executor(
                        pool, run_cell, spec.base_config, cell, spec.episodes
                    )
                    return cell, result

                for future in asyncio.as_completed([_run(c) for c in pending]):
                    await queue.put(await future)
    finally:
        await queue.put(None)
        await writer

    return read_results(spec.results_path)


def run_experiment(spec: ExperimentSpec) -> pd.DataFrame:
    """Synchronous wrapper around run_experiment_async()."""
    return asyncio.run(run_experiment_async(spec))


# =============================================================================
# Export
# =============================================================================


def export_plotdata(
    results: pd.DataFrame, figure: str, spec: Optional[ExperimentSpec] = None
) -> pd.DataFrame:
    """
    Mean and unbiased std of every metric per (agent, sweep value).

    Args:
        results: Table returned by run_experiment() or read_results().
        figure: f3 (LUAV count), f4 (vehicle count) or f5 (HUAV bandwidth).
        spec: When given, every cell of the spec must be present.

    Raises:
        ExperimentError: For an unknown figure.
        MissingCellsError: Listing absent cell keys.
    """
    if figure not in FIGURES:
        raise ExperimentError(f"figure must be one of {', '.join(FIGURES)}, got '{figure}'")
    sweep = FIGURES[figure]
    rows = results[results["sweep"] == sweep]
    if spec is not None:
        present = set(rows["key"])
        missing = [c.key for c in spec.cells() if c.key not in present]
        if missing:
            raise MissingCellsError(missing)
    if rows.empty:
        raise MissingCellsError([f"*|{sweep}=*|seed=*"])

    grouped = rows.groupby(["agent", "value"], sort=True)[list(METRICS)]
    means = grouped.mean().add_suffix("_mean")
    stds = grouped.std(ddof=1).add_suffix("_std")
    table = pd.concat([means, stds], axis=1)
    table["n_seeds"] = grouped.size()
    ordered = [c for m in METRICS for c in (f"{m}_mean", f"{m}_std")] + ["n_seeds"]
    table = table[ordered].reset_index().rename(columns={"value": sweep})
    return table


def export_series(spec: ExperimentSpec) -> pd.DataFrame:
    """
    Long table of per-episode metrics for every cell of ``spec``.

    Raises:
        MissingCellsError: Listing cells whose series file is absent.
    """
    frames, missing = [], []
    for cell in spec.cells():
        path = spec.output_dir / SERIES_DIR / cell.series_name
        if not path.exists():
            missing.append(cell.key)
            continue
        frame = pd.read_csv(path)
        frame.insert(0, "seed", cell.seed)
        frame.insert(0, spec.sweep, cell.value)
        frame.insert(0, "agent", cell.agent.value)
        frames.append(frame)
    if missing:
        raise MissingCellsError(missing)
    return pd.concat(frames, ignore_index=True)
