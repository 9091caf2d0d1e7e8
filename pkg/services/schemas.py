"""Experiment configuration documents."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator, model_validator

from bayes.schemas import BayesConfig
from config import StrictModel
from errors import ConfigError
from training.schemas import TrainConfig

SCHEMA_VERSION = 1
PROBLEM_NAMES = ("burgers", "heat", "navier_stokes")


class SolverSettings(StrictModel):
    """Grid resolutions; ``None`` picks the problem default."""

    hf_resolution: int | None = Field(None, ge=8)
    lf_resolution: int | None = Field(None, ge=8)
    study_resolutions: list[int] = [64, 128, 256]


class DataSettings(StrictModel):
    n_hf: int = Field(400, ge=1)
    n_lf: int = Field(5000, ge=0)
    hf_noise_sd: float = Field(0.0, ge=0)
    lf_noise_sd: float = Field(0.0, ge=0)
    train_mu: list[float] | None = None
    mu_range: tuple[float, float] | None = None
    eval_mu: list[float] | None = None
    held_out: int = Field(500, ge=0)

    @field_validator("train_mu", "eval_mu")
    @classmethod
    def _positive(cls, values):
        if values is not None and (not values or min(values) <= 0):
            raise ValueError(
                "parameter values must be a non-empty list of positive numbers"
            )
        return values


class NetworkSettings(StrictModel):
    widths: dict[Literal["lf", "lin", "nl", "gate"], int] = {}
    layers: dict[Literal["lf", "lin", "nl", "gate"], int] = {}
    gate_mode: Literal["adaptive", "constant", "linear", "nonlinear"] = "adaptive"


class SweepSettings(StrictModel):
    kind: Literal["sample_efficiency", "ablation", "parametric"]
    n_hf: list[int] = [100, 200, 400, 800]
    seeds: list[int] = [0, 1, 2]
    mu_values: list[float] = []


class ExperimentConfig(StrictModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "experiment"
    problem: Literal["burgers", "heat", "navier_stokes"]
    seed: int = 0
    output_dir: str | None = None
    solver: SolverSettings = SolverSettings()
    data: DataSettings = DataSettings()
    network: NetworkSettings = NetworkSettings()
    train: TrainConfig = TrainConfig()
    bayes: BayesConfig | None = BayesConfig()
    evaluation_resolution: list[int] | None = None
    init_checkpoint: str | None = None
    sweep: SweepSettings | None = None

    @model_validator(mode="after")
    def _check_references(self) -> "ExperimentConfig":
        if self.init_checkpoint is not None and not Path(self.init_checkpoint).exists():
            raise ValueError(f"init_checkpoint {self.init_checkpoint} does not exist")
        n_residual = self.train.collocation.n_residual
        if self.bayes is not None and self.bayes.subsample > n_residual:
            raise ValueError(
                f"bayes.subsample {self.bayes.subsample} exceeds the "
                f"{n_residual} collocation points"
            )
        return self

    def config_hash(self) -> str:
        """Short content hash of everything that affects results."""
        payload = self.model_dump(mode="json", exclude={"output_dir"})
        encoded = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(encoded).hexdigest()[:8]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.parse(data)
