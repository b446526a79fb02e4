from datetime import datetime
from pydantic import BaseModel, Field

from shadowbag.schemas.config import EigenFloor, RunConfig
from shadowbag.schemas.model import ModelFile


class EpochRecord(BaseModel):
    phase: str
    epoch: int
    cost: float
    energy: float
    energy_density: float
    lambda_min: float
    lr: float
    mu: float
    beta1: float
    beta2: float
    x_eps: float
    retries: int = 0


TRACE_COLUMNS = [
    "epoch", "cost", "energy", "energy_density", "lambda_min",
    "lr", "mu", "beta1", "beta2", "x_eps",
]


class OperatorRow(BaseModel):
    string: str
    weight: int
    exact: float
    estimated: float
    rescaled: float


class ErrorReport(BaseModel):
    energy_density_error: float = Field(..., ge=0.0)
    energy_density_error_raw: float = Field(..., ge=0.0)
    rms_error_by_weight: dict[int, float]
    rms_error_by_span: dict[int, float] = {}
    operators: list[OperatorRow] = []
    f: float = 1.0


class FloorSample(BaseModel):
    N: int
    L: int
    lambda_min: float


class FloorFit(BaseModel):
    floor: EigenFloor
    residual_std: float
    samples: list[FloorSample]


class ExactMeta(BaseModel):
    model: str
    model_hash: str
    L: int
    energy: float
    degenerate: bool
    gap: float


class RunManifest(BaseModel):
    version: str
    created_at: datetime
    config: RunConfig
    model_name: str
    model: ModelFile
    model_hash: str
    floor: EigenFloor
    eps0: float
    eps: float
    mu0: float
    g: float
    moments_reset_at_main: bool = True
    preopt_steps: int = 0
    f: float | None = None
    final_energy: float | None = None
    final_lambda_min: float | None = None


class OptimizeReport(BaseModel):
    eps0: float
    eps: float
    mu0: float
    g: float
    preopt_steps: int
    epochs: int
    final_energy: float
    final_energy_density: float
    final_lambda_min: float
    f: float | None = None
