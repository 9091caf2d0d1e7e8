"""Validated sampler configuration."""

from __future__ import annotations

from typing import Literal

from pydantic import Field, model_validator

from config import StrictModel

Scale = float | Literal["learn", "auto"]


class BayesConfig(StrictModel):
    """Priors, noise scales and HMC settings.

    ``sigma_hf="auto"`` uses the injected HF label noise when it is known and
    learns the scale otherwise. ``"learn"`` always samples ``log sigma`` with a
    half-normal(1) hyperprior.
    """

    prior_scale: float = Field(1.0, gt=0, allow_inf_nan=False)
    sigma_hf: Scale = "auto"
    sigma_r: float | Literal["learn"] = 0.01
    sigma_b: float | None = Field(None, gt=0)
    sigma_lf: float | None = Field(None, gt=0)
    chains: int = Field(4, ge=2)
    warmup: int = Field(500, ge=0)
    samples: int = Field(500, ge=1)
    leapfrog_steps: int = Field(32, ge=1)
    step_size: float = Field(1e-3, gt=0, allow_inf_nan=False)
    step_jitter: float = Field(0.1, ge=0, lt=1)
    adapt: bool = True
    target_accept: float = Field(0.75, gt=0, lt=1)
    thin: int = Field(5, ge=1)
    subsample: int = Field(256, ge=0)
    init_jitter: float = Field(1e-3, ge=0)
    max_energy_error: float = Field(1000.0, gt=0)
    max_divergence_fraction: float = Field(0.1, ge=0, le=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> "BayesConfig":
        for name in ("sigma_hf", "sigma_r"):
            value = getattr(self, name)
            if isinstance(value, float) and not value > 0:
                raise ValueError(f"{name} must be positive")
        if self.adapt and self.warmup < 100:
            raise ValueError(
                "warmup must be at least 100 when step-size adaptation is on"
            )
        return self

    @property
    def n_stored(self) -> int:
        """Draws kept per chain after thinning."""
        return -(-self.samples // self.thin)
