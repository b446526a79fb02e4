from pathlib import Path
from pydantic import BaseModel, Field, field_validator, model_validator

from shadowbag.schemas.model import TermTemplate


class EigenFloor(BaseModel):
    """Ansatz constants of eps0(N, L) = (b0 - alpha0 * L') / sqrt(N)"""
    alpha0: float = Field(70.0, ge=0.0)
    b0: float = Field(340.0, ge=0.0)


class ScheduleParams(BaseModel):
    T: int = Field(300, gt=0)
    mu0: float | None = Field(None, gt=0.0)  # None: 5e-2 / N_{P:w(P)<=2}
    g: float | None = Field(None, gt=0.0)  # None: (L * sum |c_m|)^-1
    x_eps_target: float = Field(0.03, gt=0.0, le=1.0)
    lr0: float = Field(0.05, gt=0.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    backoff_factor: float = Field(0.9, gt=0.0, lt=1.0)
    grad_ratio_cap: float = Field(1.5, gt=0.0)
    preopt_gap: float = Field(0.1, gt=0.0)
    preopt_beta1: float = Field(0.9, gt=0.0, lt=1.0)
    preopt_beta2: float = Field(0.999, gt=0.0, lt=1.0)
    preopt_max_steps: int = Field(2000, gt=0)
    max_retries: int = Field(50, gt=0)


class RunConfig(BaseModel):
    """Everything one optimization run needs, validated before compute."""
    model: str | list[TermTemplate] = "main"
    L: int = Field(8, ge=2)
    N: int = Field(16384, ge=1)
    seed: int = Field(0, ge=0)
    k_M: int = 2
    schedule: ScheduleParams = ScheduleParams()
    floor: EigenFloor | None = None  # None: the settings default
    floor_file: Path | None = None
    weights: list[int] = [2, 5]
    out: Path | None = None

    @field_validator("k_M")
    @classmethod
    def _check_k_m(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError("k_M must be 1 or 2; larger bases are unsupported")
        return value

    @model_validator(mode="after")
    def _check_weights(self):
        for k in self.weights:
            if not 1 <= k <= self.L:
                raise ValueError(f"reported weight {k} must lie in [1, L={self.L}]")
        return self


class SweepConfig(BaseModel):
    """Independent runs over N x x_eps x seed sharing one base config"""
    base: RunConfig = RunConfig()
    n_values: list[int] = Field([4096, 8192, 16384], min_length=1)
    x_eps_values: list[float] | None = None
    seeds: list[int] = Field([0], min_length=1)
    exact: Path | None = None

    @field_validator("n_values")
    @classmethod
    def _check_n(cls, values: list[int]) -> list[int]:
        if any(n < 1 for n in values):
            raise ValueError("every N must be >= 1")
        return values

    @field_validator("x_eps_values")
    @classmethod
    def _check_x_eps(cls, values: list[float] | None) -> list[float] | None:
        if values is not None and any(not 0.0 < x <= 1.0 for x in values):
            raise ValueError("every x_eps must lie in (0, 1]")
        return values


class FloorFitConfig(BaseModel):
    l_values: list[int] = Field([4, 6, 8], min_length=1)
    n_values: list[int] = Field([4096, 16384], min_length=1)
    seed: int = Field(0, ge=0)
    state: str | None = None  # product-state label, all-|0> when omitted
    repeats: int = Field(1, ge=1)
    out: Path | None = None

    @field_validator("l_values")
    @classmethod
    def _check_l(cls, values: list[int]) -> list[int]:
        if any(L < 2 for L in values):
            raise ValueError("every L must be >= 2")
        return values


class Settings(BaseModel):
    """Process-wide defaults loaded from settings.json"""
    output_root: Path = Path("runs")
    workers: int | None = None
    debug: bool = False
    checkpoint_every: int = Field(25, gt=0)
    eigen_floor: EigenFloor = EigenFloor()
