"""Desk-scale reproduction runs; minutes each, excluded from the default selection."""

import math
import statistics

import numpy as np
import pytest

from shadowbag.schemas.config import EigenFloor, FloorFitConfig, RunConfig, ScheduleParams, Settings, SweepConfig
from shadowbag.services.corrmat_service import build_product_cache
from shadowbag.services.model_service import expand_model, load_hamiltonian
from shadowbag.services.optimizer_service import Evaluator, OptimizerPhase, epsilon0, preoptimize
from shadowbag.services.pauli_service import enumerate_basis
from shadowbag.services.run_service import cmd_compare, cmd_exact, cmd_floor_fit, cmd_optimize
from shadowbag.services.shadow_service import SnapshotBag
from shadowbag.services.sweep_service import run_sweep
from shadowbag.utils.json_storage import read_csv

pytestmark = pytest.mark.slow


def test_eigen_floor_fit(settings, tmp_path):
    config = FloorFitConfig(l_values=[4, 6, 8], n_values=[4096, 16384], out=tmp_path / "fit.json")
    fit = cmd_floor_fit(config, settings)
    assert 35.0 <= fit.floor.alpha0 <= 140.0
    assert 170.0 <= fit.floor.b0 <= 680.0

    collapsed = {}
    for sample in fit.samples:
        collapsed.setdefault(sample.L, []).append(sample.lambda_min * math.sqrt(sample.N))
    for values in collapsed.values():
        assert abs(values[0] - values[1]) <= 3 * fit.residual_std * math.sqrt(2)


def test_preoptimization_reaches_target():
    L, N = 4, 256
    bag = SnapshotBag.create(0, N, L)
    params = ScheduleParams()
    floor = EigenFloor()
    H, cache = load_hamiltonian("main", L), build_product_cache(enumerate_basis(L, 2))
    state = preoptimize(bag, cache, params, floor, H=H)
    assert state.phase == OptimizerPhase.MAIN
    assert state.preopt_steps <= params.preopt_max_steps
    assert Evaluator(bag, H, cache).evaluate(bag.theta).lambda_min > -params.x_eps_target * abs(epsilon0(N, L, floor))


@pytest.fixture(scope="module")
def quality_run(tmp_path_factory):
    """The L=8 main-model reference run, shared by the quality and amplitude checks."""
    root = tmp_path_factory.mktemp("quality")
    settings = Settings(output_root=root / "runs")
    config = RunConfig(model="main", L=8, N=16384, seed=0, weights=[2, 5], out=root / "run",
                       schedule=ScheduleParams(T=300, x_eps_target=0.03))
    result = cmd_optimize(config, settings)
    exact = cmd_exact(config, out=root / "exact.csv")
    return config, settings, result, exact


def test_ground_state_quality(quality_run):
    _, _, result, exact = quality_run
    report = cmd_compare(result.run_dir, exact)

    assert report.energy_density_error <= 0.05
    assert report.rms_error_by_weight[2] <= 0.1
    assert report.rms_error_by_weight[5] <= 0.15
    assert result.manifest.final_lambda_min >= -0.03 * abs(result.manifest.eps0)

    main = [r.energy for r in result.history if r.phase == "main"]
    assert main[-1] < main[0]


def test_amplitude_factor_approaches_one(quality_run, tmp_path):
    config, settings, result, _ = quality_run
    f_small = result.manifest.f
    assert 0.7 <= f_small <= 1.0

    larger = cmd_optimize(config.model_copy(update={"N": 65536, "out": tmp_path / "run_65536"}), settings)
    assert abs(larger.manifest.f - 1.0) <= abs(f_small - 1.0)


def _starting_energy(result, config: RunConfig) -> float:
    """Energy where the main phase begins: after the last pre-optimization step, or at theta = 0."""
    preopt = [r for r in result.history if r.phase == "preopt"]
    if preopt:
        return preopt[-1].energy
    bag = SnapshotBag.create(config.seed, config.N, config.L)
    H = expand_model(result.manifest.model, config.L)
    return Evaluator(bag, H, build_product_cache(enumerate_basis(config.L, 2))).evaluate(bag.theta).energy


@pytest.mark.parametrize("model, max_error", [("H1", None), ("H2", 0.08), ("H3", 0.08)])
def test_other_models(settings, tmp_path, model, max_error):
    config = RunConfig(model=model, L=8, N=8192, seed=0, weights=[2, 5], out=tmp_path / model)
    result = cmd_optimize(config, settings)

    assert result.history[-1].phase == "main"
    assert result.manifest.final_energy < _starting_energy(result, config)
    if max_error is not None:
        report = cmd_compare(result.run_dir, cmd_exact(config, out=tmp_path / f"{model}_exact.csv"))
        assert report.energy_density_error <= max_error


def test_error_shrinks_with_snapshots(settings, tmp_path):
    base = RunConfig(model="main", L=8, N=4096, weights=[2, 5],
                     schedule=ScheduleParams(T=300, x_eps_target=0.03))
    rows = run_sweep(SweepConfig(base=base, n_values=[4096, 16384], seeds=[0, 1, 2]), settings,
                     out=tmp_path / "sweep")
    assert len(rows) == 6

    median = {N: statistics.median(r["energy_density_error"] for r in rows if r["N"] == N)
              for N in (4096, 16384)}
    assert median[16384] <= median[4096]

    table = read_csv(tmp_path / "sweep" / "sweep_median.csv")
    assert [int(row["N"]) for row in table] == [4096, 16384]
    assert all(int(row["runs"]) == 3 for row in table)


def test_sweep(settings, tmp_path):
    base = RunConfig(model="main", L=6, N=2048, weights=[2, 3], schedule=ScheduleParams(T=60))
    rows = run_sweep(SweepConfig(base=base, n_values=[1024, 2048], seeds=[0, 1]), settings,
                     out=tmp_path / "sweep", workers=2)
    assert len(rows) == 4
    assert all(np.isfinite(row["energy_density_error"]) for row in rows)
    assert (tmp_path / "sweep" / "sweep_median.csv").exists()
