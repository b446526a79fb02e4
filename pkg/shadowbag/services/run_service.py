"""
Run Service - the four pipelines behind the CLI: optimize, exact, compare, floor-fit

Every run directory is self-describing: manifest.json carries the resolved config, the model
terms, their hash and the run constants, so `compare` needs nothing beyond the directory and an exact table.
"""

from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np
from pydantic import ValidationError

from shadowbag import __version__
from shadowbag.common.logger import setup_logger
from shadowbag.core.errors import ConfigError, ModelMismatchError, UndefinedFactorError
from shadowbag.schemas.config import EigenFloor, FloorFitConfig, RunConfig, Settings
from shadowbag.schemas.report import (
    TRACE_COLUMNS,
    EpochRecord,
    ErrorReport,
    ExactMeta,
    FloorFit,
    FloorSample,
    RunManifest,
)
from shadowbag.services.corrmat_service import assemble, build_product_cache, export_csv
from shadowbag.services.model_service import load_hamiltonian, model_hash, resolve_model
from shadowbag.services.optimizer_service import amplitude_factor, rescale
from shadowbag.services.oracle_service import (
    build_error_report,
    contiguous_upto,
    exact_table,
    fit_eigen_floor,
    ground_state,
    report_strings,
    sample_eigen_floor,
    shadow_budget,
    shadow_error_scale,
)
from shadowbag.services.pauli_service import PauliString, enumerate_basis
from shadowbag.services.shadow_service import ProductState, SnapshotBag, estimate_many
from shadowbag.state_machine import OptimizerMachine
from shadowbag.utils.checkpoint import load_checkpoint
from shadowbag.utils.json_storage import read_csv, read_json, write_csv, write_json

logger = setup_logger("Run")

MANIFEST_FILE = "manifest.json"
TRACE_FILE = "trace.csv"
PREOPT_TRACE_FILE = "preopt.csv"
CHECKPOINT_FILE = "checkpoint.npz"
CORRELATORS_FILE = "correlators.csv"
CORRMAT_FILE = "corrmat.csv"
EXACT_FILE = "exact.csv"
REPORT_FILE = "report.json"
OPERATORS_FILE = "operators.csv"
CORRELATIONS_FILE = "correlations.csv"


def resolve_floor(config: RunConfig, settings: Settings) -> EigenFloor:
    """A floor file (fit output or bare EigenFloor JSON) beats the inline floor, which beats settings."""
    if config.floor_file is None:
        return config.floor or settings.eigen_floor
    data = read_json(config.floor_file)
    if not data:
        raise ConfigError(f"Floor file {config.floor_file} is missing or empty")
    try:
        if "floor" in data:
            return FloorFit.model_validate(data).floor
        return EigenFloor.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid floor file {config.floor_file}: {e}") from None


def default_run_dir(config: RunConfig, settings: Settings) -> Path:
    name = config.model if isinstance(config.model, str) else "inline"
    name = Path(name).stem
    return settings.output_root / f"{name}_L{config.L}_N{config.N}_s{config.seed}"


@dataclass
class OptimizeResult:
    run_dir: Path
    manifest: RunManifest
    history: list[EpochRecord]


def _write_trace(path: Path, records: list[EpochRecord]):
    rows = [[getattr(r, column) for column in TRACE_COLUMNS] for r in records]
    write_csv(path, TRACE_COLUMNS, rows)


def cmd_optimize(config: RunConfig, settings: Settings, resume: bool = False,
                 callback: Callable[[EpochRecord], None] | None = None) -> OptimizeResult:
    model = resolve_model(config.model)
    H = load_hamiltonian(model, config.L)
    floor = resolve_floor(config, settings)
    run_dir = Path(config.out) if config.out else default_run_dir(config, settings)
    checkpoint_path = run_dir / CHECKPOINT_FILE

    state = None
    if resume and checkpoint_path.exists():
        bag, state = load_checkpoint(checkpoint_path)
        if (bag.seed, bag.N, bag.L) != (config.seed, config.N, config.L):
            raise ConfigError(f"Checkpoint in {run_dir} belongs to a different (seed, N, L)")
    else:
        bag = SnapshotBag.create(config.seed, config.N, config.L)

    logger.info(f"[Run] {model.name}: L={config.L} N={config.N} seed={config.seed} -> {run_dir}")
    cache = build_product_cache(enumerate_basis(config.L, config.k_M))
    machine = OptimizerMachine(
        bag, H, cache, config.schedule, floor,
        checkpoint_path=checkpoint_path,
        checkpoint_every=settings.checkpoint_every,
        state=state,
        callback=callback,
    )
    runner = machine.run()

    try:
        f = amplitude_factor(bag, H)
    except UndefinedFactorError:
        logger.warning("[Run] Energy estimate is zero; writing raw correlators only")
        f = None

    history = runner.state.history
    _write_trace(run_dir / TRACE_FILE, [r for r in history if r.phase == "main"])
    _write_trace(run_dir / PREOPT_TRACE_FILE, [r for r in history if r.phase == "preopt"])

    strings = report_strings(H, config.L, config.weights)
    codes = np.stack([P.codes for P in strings])
    values = estimate_many(bag, codes)
    rescaled = rescale(values, codes, 1.0 if f is None else f)
    write_csv(
        run_dir / CORRELATORS_FILE,
        ["string", "weight", "raw", "rescaled"],
        [[P.label, P.weight, float(x), float(y)] for P, x, y in zip(strings, values, rescaled)],
    )
    export_csv(assemble(bag, cache), run_dir / CORRMAT_FILE)

    manifest = RunManifest(
        version=__version__,
        created_at=datetime.now(timezone.utc),
        config=config,
        model_name=model.name,
        model=model,
        model_hash=model_hash(H),
        floor=floor,
        eps0=runner.eps0,
        eps=runner.eps,
        mu0=runner.mu0,
        g=runner.g,
        moments_reset_at_main=True,
        preopt_steps=runner.state.preopt_steps,
        f=f,
        final_energy=runner.current.energy,
        final_lambda_min=runner.current.lambda_min,
    )
    write_json(run_dir / MANIFEST_FILE, manifest.model_dump(mode="json"))
    logger.info(
        f"[Run] Done: E/L={runner.current.energy / config.L:.5f} "
        f"lambda_min={runner.current.lambda_min:.5f} f={f if f is None else round(f, 4)}"
    )
    return OptimizeResult(run_dir=run_dir, manifest=manifest, history=history)


def cmd_exact(config: RunConfig, out: Path | None = None, settings: Settings | None = None) -> Path:
    """Ground energy, every weight-<=2 correlator and contiguous correlators of each reported weight."""
    model = resolve_model(config.model)
    H = load_hamiltonian(model, config.L)
    gs = ground_state(H, config.L, seed=config.seed)

    if out is None:
        root = settings.output_root if settings else Path(".")
        out = root / f"{Path(model.name).stem}_L{config.L}_{EXACT_FILE}"
    out = Path(out)
    strings = report_strings(H, config.L, config.weights)
    table = exact_table(gs, strings)
    write_csv(out, ["string", "value"], [[label, value] for label, value in table.items()])

    meta = ExactMeta(model=model.name, model_hash=model_hash(H), L=config.L, energy=gs.energy,
                     degenerate=gs.degenerate, gap=gs.gap)
    write_json(out.with_suffix(".json"), meta.model_dump(mode="json"))
    logger.info(f"[Oracle] {model.name} L={config.L}: E0={gs.energy:.8f} (E0/L={gs.energy_density:.6f})")
    return out


def read_exact(path: Path) -> tuple[dict[str, float], ExactMeta]:
    path = Path(path)
    meta_data = read_json(path.with_suffix(".json"))
    if not meta_data:
        raise ConfigError(f"Exact table {path} has no metadata sidecar {path.with_suffix('.json').name}")
    table = {row["string"]: float(row["value"]) for row in read_csv(path)}
    return table, ExactMeta.model_validate(meta_data)


def read_run(run_dir: Path) -> tuple[RunManifest, dict[str, float]]:
    run_dir = Path(run_dir)
    data = read_json(run_dir / MANIFEST_FILE)
    if not data:
        raise ConfigError(f"{run_dir} is not a run directory (no {MANIFEST_FILE})")
    manifest = RunManifest.model_validate(data)
    raw = {row["string"]: float(row["raw"]) for row in read_csv(run_dir / CORRELATORS_FILE)}
    return manifest, raw


def correlation_series(L: int, estimated: dict[str, float], exact: dict[str, float], f: float) -> list[list]:
    """<Z0 Zr> and <X0 Xr> for r = 1..L/2: exact, raw, rescaled."""
    rows = []
    for r in range(1, L // 2 + 1):
        row = [r]
        for letter in "ZX":
            label = PauliString.from_sites(L, {0: "IXYZ".index(letter), r: "IXYZ".index(letter)}).label
            row += [exact[label], estimated[label], f * estimated[label]]
        rows.append(row)
    return rows


def cmd_compare(run_dir: Path, exact_path: Path, out: Path | None = None) -> ErrorReport:
    manifest, estimated = read_run(run_dir)
    exact, meta = read_exact(exact_path)
    config = manifest.config
    if meta.L != config.L or meta.model_hash != manifest.model_hash:
        raise ModelMismatchError(
            f"Run is {manifest.model_name} at L={config.L} ({manifest.model_hash[:12]}), "
            f"exact table is {meta.model} at L={meta.L} ({meta.model_hash[:12]})"
        )

    H = load_hamiltonian(manifest.model, config.L)
    if model_hash(H) != manifest.model_hash:
        raise ModelMismatchError(f"Stored model {manifest.model_name} no longer hashes to {manifest.model_hash[:12]}")
    f = manifest.f if manifest.f is not None else 1.0
    missing = [P.label for P in report_strings(H, config.L, config.weights) if P.label not in exact]
    if missing:
        raise ModelMismatchError(f"Exact table lacks {len(missing)} strings, e.g. {missing[0]}")
    report = build_error_report(estimated, exact, H, config.L, f, config.weights, meta.energy)

    out = Path(out) if out else Path(run_dir)
    reference = {}
    for k in config.weights:
        M = len(contiguous_upto(config.L, k))
        reference[k] = {
            "M": M,
            "shadow_error_scale": shadow_error_scale(k, M, config.N) if M > 1 else 0.0,
            "shadow_budget": shadow_budget(k, M, report.rms_error_by_weight[k])
            if report.rms_error_by_weight[k] > 0 else None,
        }
    write_json(out / REPORT_FILE, {
        **report.model_dump(mode="json", exclude={"operators"}),
        "N": config.N,
        "L": config.L,
        "exact_energy": meta.energy,
        "degenerate": meta.degenerate,
        "reference": reference,
    })
    write_csv(out / OPERATORS_FILE, ["string", "weight", "exact", "estimated", "rescaled"],
              [[r.string, r.weight, r.exact, r.estimated, r.rescaled] for r in report.operators])
    write_csv(out / CORRELATIONS_FILE,
              ["r", "zz_exact", "zz_estimated", "zz_rescaled", "xx_exact", "xx_estimated", "xx_rescaled"],
              correlation_series(config.L, estimated, exact, f))
    if meta.degenerate:
        logger.warning("[Run] Exact ground space is degenerate; correlator errors are indicative only")
    logger.info(
        f"[Run] Energy density error {report.energy_density_error:.5f}; RMS by weight "
        + ", ".join(f"{k}: {v:.4f}" for k, v in report.rms_error_by_weight.items())
    )
    return report


def floor_state(label: str | None, L: int) -> ProductState:
    """A one-letter label is repeated on every site; longer labels must have length L."""
    if not label:
        return ProductState.all_zero(L)
    return ProductState.from_label(label * L if len(label) == 1 else label)


def cmd_floor_fit(config: FloorFitConfig, settings: Settings,
                  callback: Callable[[FloorSample], None] | None = None) -> FloorFit:
    samples = []
    for L in config.l_values:
        state = floor_state(config.state, L)
        for N in config.n_values:
            for r in range(config.repeats):
                sample = sample_eigen_floor(L, N, config.seed + r, state)
                logger.debug(f"[Floor] L={L} N={N}: lambda_min*sqrt(N)={sample.lambda_min * np.sqrt(N):.2f}")
                samples.append(sample)
                if callback:
                    callback(sample)

    fit = fit_eigen_floor(samples)
    out = Path(config.out) if config.out else settings.output_root / "floor_fit.json"
    write_json(out, fit.model_dump(mode="json"))
    return fit
