"""Versioned binary checkpoints for models and posterior ensembles.

Layout is documented in ``docs/checkpoint_format.md``.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from bayes.hmc import PosteriorEnsemble
from errors import ArtifactError
from network.composite import MfModel, NetworkSpecs
from storage.artifacts import atomic_replace, write_table

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _savez(path: Path, **arrays) -> Path:
    def dump(tmp):
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)

    return atomic_replace(path, dump)


def _load(path: Path, stage: str | None):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing checkpoint {path}", stage=stage)
    with np.load(path, allow_pickle=False) as archive:
        data = {key: archive[key] for key in archive.files}
    version = int(data["format_version"])
    if version != FORMAT_VERSION:
        raise ArtifactError(
            f"{path.name} has format version {version}, expected {FORMAT_VERSION}",
            stage=stage,
        )
    return data


def save_checkpoint(model: MfModel, path: Path, stage: str) -> Path:
    path = _savez(
        path,
        format_version=np.array(FORMAT_VERSION),
        specs_json=np.array(json.dumps(model.specs.to_dict())),
        params=model.params,
        input_lo=model.input_lo,
        input_hi=model.input_hi,
        log_axes=np.array(model.log_axes, dtype=bool),
        gate_mode=np.array(model.gate_mode),
        seed=np.array(-1 if model.seed is None else model.seed),
        stage=np.array(stage),
    )
    logger.info(f"saved {stage} checkpoint to {path}")
    return path


def load_checkpoint(path: Path, stage: str | None = None) -> MfModel:
    data = _load(path, stage)
    seed = int(data["seed"])
    return MfModel(
        specs=NetworkSpecs.from_dict(json.loads(str(data["specs_json"]))),
        params=data["params"].copy(),
        input_lo=data["input_lo"].copy(),
        input_hi=data["input_hi"].copy(),
        log_axes=tuple(bool(v) for v in data["log_axes"]),
        gate_mode=str(data["gate_mode"]),
        seed=None if seed < 0 else seed,
        metadata={"stage": str(data["stage"])},
    )


def save_ensemble(ensemble: PosteriorEnsemble, directory: Path) -> tuple[Path, Path]:
    """Write ``ensemble.csv`` (per-draw summary) and ``ensemble_params.npz``."""
    directory = Path(directory)
    n_chains, n_stored = ensemble.log_posterior.shape
    chain, draw = np.meshgrid(np.arange(n_chains), np.arange(n_stored), indexing="ij")
    sigma = ensemble.sigma_hf
    sigma_column = np.full(chain.size, np.nan) if sigma is None else sigma.reshape(-1)
    frame = pd.DataFrame(
        {
            "chain": chain.reshape(-1),
            "draw": draw.reshape(-1),
            "log_posterior": ensemble.log_posterior.reshape(-1),
            "sigma_hf": sigma_column,
        }
    )
    table = write_table(frame, directory / "ensemble.csv")
    block = _savez(
        directory / "ensemble_params.npz",
        format_version=np.array(FORMAT_VERSION),
        chain=chain.reshape(-1),
        draw=draw.reshape(-1),
        draws=ensemble.draws,
        log_posterior=ensemble.log_posterior,
        step_size=ensemble.step_size,
        inv_mass=ensemble.inv_mass,
        acceptance=ensemble.acceptance,
        divergences=ensemble.divergences,
        ess=ensemble.ess,
        rhat=np.array(ensemble.rhat),
        n_params=np.array(ensemble.n_params),
        sigma_hf_index=np.array(
            -1 if ensemble.sigma_hf_index is None else ensemble.sigma_hf_index
        ),
    )
    return table, block


def load_ensemble(directory: Path) -> PosteriorEnsemble:
    data = _load(Path(directory) / "ensemble_params.npz", stage="sample")
    sigma_index = int(data["sigma_hf_index"])
    return PosteriorEnsemble(
        draws=data["draws"].copy(),
        log_posterior=data["log_posterior"].copy(),
        acceptance=data["acceptance"].copy(),
        step_size=data["step_size"].copy(),
        inv_mass=data["inv_mass"].copy(),
        divergences=data["divergences"].copy(),
        ess=data["ess"].copy(),
        rhat=float(data["rhat"]),
        n_params=int(data["n_params"]),
        sigma_hf_index=None if sigma_index < 0 else sigma_index,
    )
