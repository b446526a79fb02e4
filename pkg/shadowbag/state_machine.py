from enum import Enum, auto
from pathlib import Path
from typing import Callable

from shadowbag.common.logger import setup_logger
from shadowbag.schemas.config import EigenFloor, ScheduleParams
from shadowbag.schemas.report import EpochRecord
from shadowbag.services.corrmat_service import ProductCache
from shadowbag.services.optimizer_service import OptimizerPhase, OptimizerRun, OptimizerState
from shadowbag.services.pauli_service import HamiltonianSpec
from shadowbag.services.shadow_service import SnapshotBag
from shadowbag.utils.checkpoint import save_checkpoint

logger = setup_logger("StateMachine")


class RunState(Enum):
    INIT = auto()
    PREOPT = auto()  # barrier-only descent with dynamic eps
    MAIN = auto()  # scheduled epochs
    FINALIZE = auto()
    DONE = auto()


_PHASE_TO_STATE = {
    OptimizerPhase.PREOPT: RunState.PREOPT,
    OptimizerPhase.MAIN: RunState.MAIN,
    OptimizerPhase.DONE: RunState.FINALIZE,
}


class OptimizerMachine:
    """
    Drives one optimization run through its phases, checkpointing every
    `checkpoint_every` accepted steps and at each phase boundary.
    """

    def __init__(self, bag: SnapshotBag, H: HamiltonianSpec, cache: ProductCache,
                 params: ScheduleParams, floor: EigenFloor, checkpoint_path: Path | None = None,
                 checkpoint_every: int = 25, state: OptimizerState | None = None,
                 callback: Callable[[EpochRecord], None] | None = None):
        self.bag = bag
        self.H = H
        self.cache = cache
        self.params = params
        self.floor = floor
        self.checkpoint_path = checkpoint_path
        self.checkpoint_every = checkpoint_every
        self.callback = callback
        self.runner: OptimizerRun | None = None
        self._resume_state = state
        self.current_state = RunState.INIT
        self._handlers = {
            RunState.INIT: self._handle_init,
            RunState.PREOPT: self._handle_preopt,
            RunState.MAIN: self._handle_main,
            RunState.FINALIZE: self._handle_finalize,
        }

    def run(self) -> OptimizerRun:
        while self.current_state != RunState.DONE:
            handler = self._handlers[self.current_state]
            next_state = handler()
            if next_state != self.current_state:
                logger.debug(f"[StateTransition] {self.current_state.name} -> {next_state.name}")
                self.current_state = next_state
        return self.runner

    def checkpoint(self):
        if self.checkpoint_path is not None:
            save_checkpoint(self.checkpoint_path, self.bag, self.runner.state)

    # --- HANDLERS ---

    def _handle_init(self) -> RunState:
        self.runner = OptimizerRun(self.bag, self.H, self.cache, self.params, self.floor,
                                   state=self._resume_state, callback=self.callback)
        state = self.runner.state
        if self._resume_state is not None:
            logger.info(f"[Run] Resuming in {state.phase.value} at step {state.t}")
        return _PHASE_TO_STATE[state.phase]

    def _run_block(self, phase: OptimizerPhase) -> RunState:
        for _ in range(self.checkpoint_every):
            self.runner.step()
            if self.runner.state.phase != phase:
                self.checkpoint()
                return _PHASE_TO_STATE[self.runner.state.phase]
        self.checkpoint()
        return _PHASE_TO_STATE[phase]

    def _handle_preopt(self) -> RunState:
        return self._run_block(OptimizerPhase.PREOPT)

    def _handle_main(self) -> RunState:
        return self._run_block(OptimizerPhase.MAIN)

    def _handle_finalize(self) -> RunState:
        self.checkpoint()
        return RunState.DONE
