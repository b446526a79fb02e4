"""
Sweep Service - independent optimization runs over N x x_eps x seed

Each point runs in its own worker process; at most `workers` run at once. Points share one
exact table, computed up front when the sweep config does not name one.
"""

import itertools
import statistics
from pathlib import Path
from typing import Callable

import anyio
import anyio.to_process
import psutil

from shadowbag.common.logger import setup_logger, set_debug_mode
from shadowbag.core.errors import EnvelopeError
from shadowbag.schemas.config import RunConfig, Settings, SweepConfig
from shadowbag.services.oracle_service import MAX_SITES, contiguous_upto, shadow_error_scale
from shadowbag.services.run_service import cmd_compare, cmd_exact, cmd_optimize
from shadowbag.utils.json_storage import write_csv

logger = setup_logger("Sweep")

SWEEP_COLUMNS = [
    "N", "x_eps", "seed", "f", "final_energy_density", "final_lambda_min",
    "energy_density_error", "energy_density_error_raw",
]


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def sweep_points(config: SweepConfig, root: Path) -> list[RunConfig]:
    base = config.base
    x_values = config.x_eps_values or [base.schedule.x_eps_target]
    points = []
    for N, x_eps, seed in itertools.product(config.n_values, x_values, config.seeds):
        schedule = base.schedule.model_copy(update={"x_eps_target": x_eps})
        points.append(base.model_copy(update={
            "N": N,
            "seed": seed,
            "schedule": schedule,
            "out": root / f"N{N}_x{x_eps:g}_s{seed}",
        }))
    return points


def run_point(config_json: str, settings_json: str, exact_path: str | None) -> dict:
    """Worker entry point: one optimize (+ compare) run, summarized as a sweep row."""
    config = RunConfig.model_validate_json(config_json)
    settings = Settings.model_validate_json(settings_json)
    set_debug_mode(settings.debug)
    result = cmd_optimize(config, settings)
    manifest = result.manifest
    row = {
        "N": config.N,
        "x_eps": config.schedule.x_eps_target,
        "seed": config.seed,
        "f": manifest.f,
        "final_energy_density": manifest.final_energy / config.L,
        "final_lambda_min": manifest.final_lambda_min,
    }
    if exact_path:
        report = cmd_compare(result.run_dir, Path(exact_path))
        row["energy_density_error"] = report.energy_density_error
        row["energy_density_error_raw"] = report.energy_density_error_raw
        for k, value in report.rms_error_by_weight.items():
            row[f"rms_{k}"] = value
    return row


def _columns(weights: list[int]) -> list[str]:
    columns = list(SWEEP_COLUMNS)
    for k in weights:
        columns += [f"rms_{k}", f"reference_{k}"]
    return columns


def _with_reference(row: dict, L: int, weights: list[int]) -> dict:
    for k in weights:
        M = len(contiguous_upto(L, k))
        row[f"reference_{k}"] = shadow_error_scale(k, M, row["N"])
    return row


def median_rows(rows: list[dict], columns: list[str]) -> list[list]:
    """Median over seeds for every (N, x_eps) point."""
    grouped: dict[tuple, list[dict]] = {}
    for row in rows:
        grouped.setdefault((row["N"], row["x_eps"]), []).append(row)
    out = []
    for (N, x_eps), group in sorted(grouped.items()):
        line = [N, x_eps, len(group)]
        for column in columns[3:]:
            values = [r[column] for r in group if r.get(column) is not None]
            line.append(statistics.median(values) if values else None)
        out.append(line)
    return out


async def _run_all(points: list[RunConfig], settings: Settings, exact_path: Path | None,
                   workers: int, on_done: Callable[[dict], None] | None) -> list[dict]:
    limiter = anyio.CapacityLimiter(workers)
    rows: list[dict] = []
    settings_json = settings.model_dump_json()
    exact = str(exact_path) if exact_path else None

    async def worker(point: RunConfig):
        row = await anyio.to_process.run_sync(
            run_point, point.model_dump_json(), settings_json, exact, limiter=limiter
        )
        rows.append(row)
        logger.info(f"[Sweep] N={row['N']} x_eps={row['x_eps']:g} seed={row['seed']} finished")
        if on_done:
            on_done(row)

    async with anyio.create_task_group() as tg:
        for point in points:
            tg.start_soon(worker, point)
    return rows


def run_sweep(config: SweepConfig, settings: Settings, out: Path | None = None,
              workers: int | None = None,
              on_done: Callable[[dict], None] | None = None) -> list[dict]:
    root = Path(out) if out else settings.output_root / "sweep"
    workers = workers or settings.workers or default_workers()
    base = config.base

    exact_path = config.exact
    if exact_path is None:
        if base.L <= MAX_SITES:
            exact_path = cmd_exact(base, out=root / "exact.csv")
        else:
            logger.warning(f"[Sweep] L={base.L} exceeds the oracle envelope; errors are not computed")
    elif base.L > MAX_SITES:
        raise EnvelopeError(f"L={base.L} exceeds the oracle envelope")

    points = sweep_points(config, root)
    logger.info(f"[Sweep] {len(points)} runs on {workers} workers -> {root}")
    rows = anyio.run(_run_all, points, settings, exact_path, workers, on_done)

    rows = [_with_reference(row, base.L, base.weights) for row in rows]
    rows.sort(key=lambda r: (r["N"], r["x_eps"], r["seed"]))
    columns = _columns(base.weights)
    write_csv(root / "sweep.csv", columns, [[row.get(c) for c in columns] for row in rows])
    write_csv(root / "sweep_median.csv", ["N", "x_eps", "runs"] + columns[3:], median_rows(rows, columns))
    return rows
