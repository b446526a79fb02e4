import argparse
import json
from pathlib import Path

import pyfiglet
from pydantic import ValidationError
from rich.align import Align
from rich.panel import Panel
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskProgressColumn,
    TextColumn,
    TimeRemainingColumn,
)

from shadowbag import __version__
from shadowbag.common.logger import console, set_debug_mode, setup_logger
from shadowbag.core.config import settings as default_settings
from shadowbag.core.errors import ConfigError, ShadowBagError
from shadowbag.schemas.config import FloorFitConfig, RunConfig, Settings, SweepConfig
from shadowbag.services.run_service import cmd_compare, cmd_exact, cmd_floor_fit, cmd_optimize
from shadowbag.services.sweep_service import run_sweep

logger = setup_logger("shadowbag")


def print_banner():
    ascii_art = pyfiglet.figlet_format("shadowbag", font="slant")
    banner_text = (
        f"[bold cyan]{ascii_art}[/bold cyan]\n"
        f"[bold green]Variational classical shadows under a positivity barrier[/bold green]\n"
        f"[italic white]version {__version__}[/italic white]"
    )
    console.print(Panel(Align.center(banner_text), border_style="bright_cyan", padding=(1, 2)))


def _progress() -> Progress:
    return Progress(
        SpinnerColumn(),
        TextColumn("[bold cyan]{task.description}"),
        BarColumn(bar_width=40, complete_style="bold #85FF52", finished_style="bold #85FF52"),
        TaskProgressColumn(),
        TimeRemainingColumn(),
        TextColumn("[bold yellow]{task.fields[status]}"),
        console=console,
        transient=True,
    )


def _load_document(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from None


def _override(data: dict, args, fields: tuple[str, ...]) -> dict:
    for name in fields:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value if not isinstance(value, Path) else str(value)
    return data


def run_config(args) -> RunConfig:
    return RunConfig.model_validate(_override(_load_document(args.config), args, ("seed", "model", "out")))


def _settings(args) -> Settings:
    updates = {}
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if args.debug:
        updates["debug"] = True
    return default_settings.model_copy(update=updates)


# --- Commands ---

def do_optimize(args, settings: Settings) -> int:
    config = run_config(args)
    with _progress() as progress:
        preopt = progress.add_task("Pre-optimizing", total=config.schedule.preopt_max_steps, status="")
        main = progress.add_task("Optimizing", total=config.schedule.T, status="", visible=False)

        def on_epoch(record):
            status = f"E/L={record.energy_density:+.4f} λmin={record.lambda_min:+.4f}"
            if record.phase == "preopt":
                progress.update(preopt, advance=1, status=status)
            else:
                progress.update(preopt, visible=False)
                progress.update(main, visible=True, completed=record.epoch + 1, status=status)

        result = cmd_optimize(config, settings, resume=args.resume, callback=on_epoch)
    console.print(f"[bold green]Run written to[/bold green] {result.run_dir}")
    return 0


def do_exact(args, settings: Settings) -> int:
    config = run_config(args)
    path = cmd_exact(config, out=args.out_file, settings=settings)
    console.print(f"[bold green]Exact table written to[/bold green] {path}")
    return 0


def do_compare(args, settings: Settings) -> int:
    report = cmd_compare(args.run_dir, args.exact, out=args.out)
    console.print_json(report.model_dump_json(exclude={"operators"}))
    return 0


def do_floor_fit(args, settings: Settings) -> int:
    data = _override(_load_document(args.config), args, ("seed", "out"))
    config = FloorFitConfig.model_validate(data)
    total = len(config.l_values) * len(config.n_values) * config.repeats
    with _progress() as progress:
        task = progress.add_task("Sampling λmin", total=total, status="")

        def on_sample(sample):
            progress.update(task, advance=1, status=f"L={sample.L} N={sample.N}")

        fit = cmd_floor_fit(config, settings, callback=on_sample)
    console.print_json(fit.floor.model_dump_json())
    return 0


def do_sweep(args, settings: Settings) -> int:
    config = SweepConfig.model_validate(_load_document(args.config))
    if args.seed is not None:
        config = config.model_copy(update={"seeds": [args.seed]})
    if args.model is not None:
        config = config.model_copy(update={"base": config.base.model_copy(update={"model": args.model})})
    rows = run_sweep(config, settings, out=args.out, workers=settings.workers)
    console.print(f"[bold green]{len(rows)} sweep runs finished[/bold green]")
    return 0


COMMANDS = {
    "optimize": do_optimize,
    "exact": do_exact,
    "compare": do_compare,
    "floor-fit": do_floor_fit,
    "sweep": do_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowbag", description="Variational classical-shadow ground states")
    parser.add_argument("--debug", action="store_true", help="DEBUG logging")
    parser.add_argument("--no-banner", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output directory"):
        p.add_argument("--config", type=Path, help="JSON config document")
        p.add_argument("--seed", type=int)
        p.add_argument("--model", help="builtin model name or model JSON path")
        p.add_argument("--out", type=Path, help=out_help)

    p = sub.add_parser("optimize", help="run the two-phase optimization")
    common(p)
    p.add_argument("--resume", action="store_true", help="continue from the run's checkpoint")

    p = sub.add_parser("exact", help="exact ground state and correlator table")
    common(p)
    p.add_argument("--out-file", type=Path, help="exact CSV path")

    p = sub.add_parser("compare", help="error report of a run against an exact table")
    p.add_argument("run_dir", type=Path)
    p.add_argument("exact", type=Path)
    p.add_argument("--out", type=Path, help="report directory (defaults to the run directory)")

    p = sub.add_parser("floor-fit", help="fit the eigenvalue floor from simulated shadows")
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="fit JSON path")

    p = sub.add_parser("sweep", help="independent runs over N, x_eps and seeds")
    common(p)
    p.add_argument("--workers", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = _settings(args)
        set_debug_mode(settings.debug)
        if not args.no_banner:
            print_banner()
        return COMMANDS[args.command](args, settings)
    except ValidationError as e:
        logger.error(f"[Config] {e}")
        return ConfigError.exit_code
    except ShadowBagError as e:
        logger.error(f"[{type(e).__name__}] {e}")
        return e.exit_code
