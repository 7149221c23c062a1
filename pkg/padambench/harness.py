"""
Experiment driver: wires a problem to an optimizer and records error series.

Every run owns four streams derived from its seed, one per role, so that
changing e.g. the number of Monte Carlo test samples never perturbs the
training data:

    init=0  initial parameters
    train=1 training mini-batches
    select=2 fresh batches for PADAM channel selection
    test=3  Monte Carlo test points (re-derived at every evaluation, so all
            evaluations of a seed use the same points)
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from padambench import drivers  # noqa: F401  (registers the optimizers)
from padambench import problems  # noqa: F401  (registers the problems)
from padambench import registry
from padambench.config import RunConfig
from padambench.drivers import RAW_CHANNEL
from padambench.errors import NonFiniteError, OutputError, SelectionError
from padambench.prng import derive_stream
from padambench.stream import SeriesRow, read_series, write_aggregate, write_series

logger = logging.getLogger(__name__)

ROLE_INIT = 0
ROLE_TRAIN = 1
ROLE_SELECT = 2
ROLE_TEST = 3

SERIES_FILE = "series.csv"
AGGREGATE_FILE = "aggregate.json"


@dataclass
class ErrorSeries:
    """Rows logged by one seed; PADAM runs also carry the ``-raw`` baseline."""

    seed: int
    rows: list[SeriesRow] = field(default_factory=list)

    @property
    def diverged(self) -> bool:
        return any(row.diverged for row in self.rows)

    def for_optimizer(self, optimizer: str) -> list[SeriesRow]:
        return [row for row in self.rows if row.optimizer == optimizer]

    def optimizers(self) -> list[str]:
        return list(dict.fromkeys(row.optimizer for row in self.rows))


@dataclass
class ExperimentResult:
    series: list[ErrorSeries]
    aggregate: dict[str, Any]

    @property
    def diverged_seed_count(self) -> int:
        return sum(1 for s in self.series if s.diverged)


def raw_id(optimizer: str) -> str:
    """Series id of the underlying Adam iterate of an averaged optimizer."""
    return f"{optimizer}-raw"


def build_objective(config: RunConfig):
    cls = registry.get_problem(config.problem)
    return cls(**config.problem_options.kwargs_for(config.problem))


def build_driver(config: RunConfig, params: np.ndarray):
    factory = registry.get_optimizer(config.optimizer)
    return factory(
        params,
        config.hyper,
        config.steps,
        channels=config.channels,
        channel6_literal=config.padam10_channel6_literal,
    )


def logged_steps(steps: int, eval_every: int) -> list[int]:
    """Step 0, every multiple of eval_every, and the final step."""
    logged = list(range(0, steps + 1, eval_every))
    if logged[-1] != steps:
        logged.append(steps)
    return logged


def _test_error(objective, params: np.ndarray, seed: int, samples: int, step: int) -> float:
    if not np.all(np.isfinite(params)):
        raise NonFiniteError(f"Non-finite iterate at step {step}", step=step)
    error = objective.test_error(params, derive_stream(seed, ROLE_TEST), samples)
    if not math.isfinite(error):
        raise NonFiniteError(f"Non-finite test error at step {step}", step=step)
    return error


def run_single(config: RunConfig, seed: int) -> ErrorSeries:
    """
    Train one seed for ``config.steps`` steps and log its test errors.

    For PADAM the reported iterate is the channel chosen at the most recent
    multiple of n_T (channel 1 before the first selection); the underlying
    Adam iterate is logged alongside under ``<optimizer>-raw``. A run that
    produces a non-finite value ends with a ``diverged`` row.
    """
    objective = build_objective(config)
    params = objective.init_params(derive_stream(seed, ROLE_INIT))
    train_stream = derive_stream(seed, ROLE_TRAIN)
    select_stream = derive_stream(seed, ROLE_SELECT)
    driver = build_driver(config, params)
    series = ErrorSeries(seed=seed)
    to_log = set(logged_steps(config.steps, config.eval_every))

    def record(step: int) -> None:
        iterate, channel = driver.report()
        error = _test_error(objective, iterate, seed, config.mc_samples, step)
        rows = [SeriesRow(config.optimizer, seed, step, error, channel)]
        if driver.has_raw_baseline:
            raw_error = _test_error(objective, driver.raw, seed, config.mc_samples, step)
            rows.append(SeriesRow(raw_id(config.optimizer), seed, step, raw_error, RAW_CHANNEL))
        series.rows.extend(rows)

    logger.info(
        "Run %s/%s seed=%d steps=%d", config.problem, config.optimizer, seed, config.steps
    )
    step = 0
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            record(0)
            for step in range(1, config.steps + 1):
                batch = objective.sample_batch(train_stream, config.batch)
                driver.step(objective.grad(driver.raw, batch))
                if driver.needs_selection and step % config.n_t == 0:
                    driver.select(objective, select_stream, config.batch)
                if step in to_log:
                    record(step)
    except (NonFiniteError, SelectionError) as e:
        logger.warning("Seed %d diverged at step %d: %s", seed, step, e)
        _, channel = driver.report()
        series.rows.append(SeriesRow(config.optimizer, seed, step, None, channel))
        if driver.has_raw_baseline:
            series.rows.append(SeriesRow(raw_id(config.optimizer), seed, step, None, RAW_CHANNEL))
    else:
        logger.info("Seed %d finished: final error %.6g", seed, series.rows[-1].error)
    return series


def aggregate_series(
    series_list: Sequence[ErrorSeries], optimizer: str
) -> tuple[list[list[float]], float | None, int]:
    """
    Mean error per step over seeds (the L1 error over the probability space).

    Diverged seeds are excluded from the means and counted instead.

    Returns:
        ``([[step, mean], ...], final_mean or None, diverged_seed_count)``
    """
    diverged = 0
    by_step: dict[int, list[float]] = {}
    finals: list[float] = []
    for series in series_list:
        rows = series.for_optimizer(optimizer)
        if any(row.diverged for row in rows):
            diverged += 1
            continue
        for row in rows:
            by_step.setdefault(row.step, []).append(row.error)
        if rows:
            finals.append(rows[-1].error)
    per_step = [
        [step, math.fsum(errors) / len(errors)] for step, errors in sorted(by_step.items())
    ]
    final = math.fsum(finals) / len(finals) if finals else None
    return per_step, final, diverged


def build_aggregate(config: RunConfig, series_list: Sequence[ErrorSeries]) -> dict[str, Any]:
    per_step, final, diverged = aggregate_series(series_list, config.optimizer)
    aggregate: dict[str, Any] = {
        "config_echo": config.to_echo(),
        "per_step_mean_error": per_step,
        "final_mean_error": final,
        "diverged_seed_count": diverged,
    }
    baseline = raw_id(config.optimizer)
    if any(baseline in s.optimizers() for s in series_list):
        raw_per_step, raw_final, _ = aggregate_series(series_list, baseline)
        aggregate["raw_per_step_mean_error"] = raw_per_step
        aggregate["raw_final_mean_error"] = raw_final
    return aggregate


def _open_for_write(path: Path):
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}", path=str(path)) from e


def write_results(
    out_dir: str | os.PathLike, config: RunConfig, result: ExperimentResult
) -> list[Path]:
    """
    Write per-seed CSVs, the merged series.csv and aggregate.json.

    The merged file is assembled single-threaded from the per-seed files in
    seed order.

    Raises:
        OutputError: If a file cannot be created or read back.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create output directory {out}: {e}", path=str(out)) from e

    written = []
    for series in result.series:
        path = out / f"{config.optimizer}_seed{series.seed}.csv"
        with _open_for_write(path) as f:
            write_series(series.rows, f)
        written.append(path)

    merged = out / SERIES_FILE
    with _open_for_write(merged) as f_out:
        write_series([], f_out)
        for path in written[: len(result.series)]:
            try:
                with open(path, "r", encoding="utf-8", newline="") as f_in:
                    write_series(read_series(f_in), f_out, header=False)
            except OSError as e:
                raise OutputError(f"Cannot read back {path}: {e}", path=str(path)) from e

    aggregate_path = out / AGGREGATE_FILE
    with _open_for_write(aggregate_path) as f:
        write_aggregate(result.aggregate, f)

    written += [merged, aggregate_path]
    for path in written:
        logger.info("Wrote %s", path)
    return written


def run_experiment(config: RunConfig) -> ExperimentResult:
    """
    Run every seed, aggregate, and write files when ``config.out_path`` is set.

    Seeds run in a process pool when ``config.jobs > 1``; results are
    ordered by seed either way, so output does not depend on scheduling.
    """
    seeds = config.seed_values()
    if config.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(seeds))) as pool:
            series_list = list(pool.map(run_single, [config] * len(seeds), seeds))
    else:
        series_list = [run_single(config, seed) for seed in seeds]

    result = ExperimentResult(series=series_list, aggregate=build_aggregate(config, series_list))
    if result.diverged_seed_count:
        logger.warning("%d of %d seeds diverged", result.diverged_seed_count, len(seeds))
    if config.out_path:
        write_results(config.out_path, config, result)
    return result
