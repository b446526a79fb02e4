import numpy as np
import pytest

from shadowbag.core.errors import ConfigError
from shadowbag.services.optimizer_service import OptimizerPhase, OptimizerRun, OptimizerState
from shadowbag.state_machine import OptimizerMachine, RunState
from shadowbag.utils.checkpoint import load_checkpoint, save_checkpoint
from tests.dense import random_bag


def _main_state(bag, params) -> OptimizerState:
    return OptimizerState.fresh(bag.N, bag.L, params.lr0, params.x_eps_target, phase=OptimizerPhase.MAIN)


class TestCheckpoint:

    def test_round_trip(self, tmp_path, cache_l4, main_l4, loose_floor, short_schedule):
        bag = random_bag(0, 16, 4)
        run = OptimizerRun(bag, main_l4, cache_l4, short_schedule, loose_floor,
                           state=_main_state(bag, short_schedule))
        run.step()
        run.step()
        save_checkpoint(tmp_path / "ck.npz", bag, run.state)

        loaded_bag, state = load_checkpoint(tmp_path / "ck.npz")
        assert (loaded_bag.seed, loaded_bag.N, loaded_bag.L) == (bag.seed, bag.N, bag.L)
        np.testing.assert_array_equal(loaded_bag.theta, bag.theta)
        np.testing.assert_array_equal(loaded_bag.coeffs.u_z, bag.coeffs.u_z)
        assert state.t == 2
        assert state.phase == OptimizerPhase.MAIN
        assert state.lr == run.state.lr
        np.testing.assert_array_equal(state.m, run.state.m)
        np.testing.assert_array_equal(state.v, run.state.v)
        assert state.history == run.state.history

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError):
            load_checkpoint(tmp_path / "absent.npz")


class TestOptimizerMachine:

    def test_runs_to_done_and_checkpoints(self, tmp_path, cache_l4, main_l4, loose_floor, short_schedule):
        bag = random_bag(1, 16, 4)
        path = tmp_path / "ck.npz"
        machine = OptimizerMachine(bag, main_l4, cache_l4, short_schedule, loose_floor,
                                   checkpoint_path=path, checkpoint_every=3)
        runner = machine.run()
        assert machine.current_state == RunState.DONE
        assert runner.done
        assert path.exists()
        _, state = load_checkpoint(path)
        assert state.phase == OptimizerPhase.DONE
        assert len(state.history) == short_schedule.T

    def test_resume_matches_uninterrupted_run(self, tmp_path, cache_l4, main_l4, loose_floor, short_schedule):
        straight = random_bag(2, 16, 4)
        OptimizerMachine(straight, main_l4, cache_l4, short_schedule, loose_floor,
                         state=_main_state(straight, short_schedule)).run()

        bag = random_bag(2, 16, 4)
        run = OptimizerRun(bag, main_l4, cache_l4, short_schedule, loose_floor,
                           state=_main_state(bag, short_schedule))
        run.step()
        save_checkpoint(tmp_path / "ck.npz", bag, run.state)

        resumed_bag, state = load_checkpoint(tmp_path / "ck.npz")
        machine = OptimizerMachine(resumed_bag, main_l4, cache_l4, short_schedule, loose_floor, state=state)
        runner = machine.run()
        np.testing.assert_array_equal(resumed_bag.theta, straight.theta)
        assert [r.epoch for r in runner.state.history] == [0, 1, 2, 3]
