"""Validated training configuration."""

from __future__ import annotations

from typing import Literal

from pydantic import Field, model_validator

from config import StrictModel
from loss.weights import LossWeights

SamplingStrategy = Literal["uniform", "latin-hypercube", "residual-adaptive"]


class StageSchedule(StrictModel):
    epochs: int = Field(ge=0)
    lr: float = Field(gt=0, allow_inf_nan=False)
    lr_min: float | None = Field(None, gt=0, allow_inf_nan=False)


class CollocationSettings(StrictModel):
    n_residual: int = Field(2000, ge=0)
    n_boundary: int = Field(400, ge=0)
    n_initial: int = Field(200, ge=0)
    n_param: int = Field(8, ge=1)
    strategy: SamplingStrategy = "latin-hypercube"

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.n_residual, self.n_boundary, self.n_initial, self.n_param)


class AblationFlags(StrictModel):
    no_gating: bool = False
    no_lf_pretrain: bool = False
    no_residual: bool = False

    @property
    def label(self) -> str:
        enabled = [name for name, on in self.model_dump().items() if on]
        return "+".join(enabled) if enabled else "full"


class TrainConfig(StrictModel):
    lf_pretrain: StageSchedule = StageSchedule(epochs=5000, lr=1e-3)
    mf_adam: StageSchedule = StageSchedule(epochs=10000, lr=1e-3, lr_min=1e-4)
    lbfgs_iters: int = Field(500, ge=0)
    lbfgs_memory: int = Field(20, ge=1)
    lbfgs_tol: float = Field(1e-8, gt=0)
    lf_batch_size: int = Field(1000, ge=1)
    residual_batch_size: int = Field(1000, ge=1)
    lf_finetune_factor: float = Field(0.1, ge=0)
    freeze_lf: bool = False
    collocation: CollocationSettings = CollocationSettings()
    resample_every: int = Field(500, ge=0)
    resample_strategy: SamplingStrategy = "residual-adaptive"
    weight_update_every: int = Field(100, ge=0)
    initial_weights: LossWeights = LossWeights()
    log_every: int = Field(500, ge=1)
    seed: int = 0
    ablation: AblationFlags = AblationFlags()

    @model_validator(mode="after")
    def _check_decay(self) -> "TrainConfig":
        lr_min = self.mf_adam.lr_min
        if lr_min is not None and lr_min > self.mf_adam.lr:
            raise ValueError("mf_adam.lr_min must not exceed mf_adam.lr")
        return self
