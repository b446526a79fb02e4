"""
Checkpoint files: bag angles plus optimizer state in one .npz. Rotation coefficients are
not stored; they are regenerated from (seed, N, L).
"""

import json
import os
import uuid
from pathlib import Path

import numpy as np

from shadowbag.core.errors import ConfigError
from shadowbag.schemas.report import EpochRecord
from shadowbag.services.optimizer_service import OptimizerPhase, OptimizerState
from shadowbag.services.shadow_service import SnapshotBag


def save_checkpoint(path: Path, bag: SnapshotBag, state: OptimizerState) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    history = json.dumps([record.model_dump() for record in state.history])

    tmp = path.parent / f"{path.name}.{uuid.uuid4()}.tmp"
    with open(tmp, "wb") as f:
        np.savez(
            f,
            seed=bag.seed, N=bag.N, L=bag.L, theta=bag.theta,
            t=state.t, lr=state.lr, m=state.m, v=state.v, x_eps=state.x_eps,
            phase=state.phase.value, preopt_steps=state.preopt_steps, history=history,
        )
    os.replace(tmp, path)


def load_checkpoint(path: Path) -> tuple[SnapshotBag, OptimizerState]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"No checkpoint at {path}")

    with np.load(path, allow_pickle=False) as data:
        bag = SnapshotBag(int(data["seed"]), int(data["N"]), int(data["L"]), theta=data["theta"])
        state = OptimizerState(
            t=int(data["t"]),
            lr=float(data["lr"]),
            m=np.array(data["m"]),
            v=np.array(data["v"]),
            x_eps=float(data["x_eps"]),
            phase=OptimizerPhase(str(data["phase"])),
            history=[EpochRecord(**record) for record in json.loads(str(data["history"]))],
            preopt_steps=int(data["preopt_steps"]),
        )
    return bag, state
