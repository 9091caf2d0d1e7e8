"""Labeled samples drawn from gridded solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from errors import ContractError
from pde.sampling import CollocationSet
from solvers.grid import GridSolution


@dataclass
class LabeledSet:
    """Points ``(N, D + 1)`` with the parameter last, labels ``(N, O)``."""

    points: np.ndarray
    labels: np.ndarray
    fidelity: str
    noise_sd: float = 0.0
    columns: tuple[str, ...] = ()
    fields: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(len(self.points), -1)
        if not self.columns:
            self.columns = tuple(f"c{i}" for i in range(self.points.shape[1]))
        if not self.fields:
            self.fields = tuple(f"f{i}" for i in range(self.labels.shape[1]))

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, index) -> "LabeledSet":
        return LabeledSet(
            self.points[index],
            self.labels[index],
            self.fidelity,
            self.noise_sd,
            self.columns,
            self.fields,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.points, columns=list(self.columns))
        for i, name in enumerate(self.fields):
            frame[name] = self.labels[:, i]
        frame["fidelity"] = self.fidelity
        frame["noise_sd"] = self.noise_sd
        return frame

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, columns: Sequence[str], fields: Sequence[str]
    ) -> "LabeledSet":
        missing = [c for c in list(columns) + list(fields) if c not in frame.columns]
        if missing:
            raise ContractError(f"dataset frame is missing columns {missing}")
        fidelity = str(frame["fidelity"].iloc[0]) if len(frame) else "HF"
        noise_sd = float(frame["noise_sd"].iloc[0]) if len(frame) else 0.0
        return cls(
            frame[list(columns)].to_numpy(dtype=float),
            frame[list(fields)].to_numpy(dtype=float),
            fidelity,
            noise_sd,
            tuple(columns),
            tuple(fields),
        )

    @classmethod
    def concat(cls, sets: Iterable["LabeledSet"]) -> "LabeledSet":
        sets = [s for s in sets if s is not None]
        if not sets:
            raise ContractError("nothing to concatenate")
        first = sets[0]
        return cls(
            np.vstack([s.points for s in sets]),
            np.vstack([s.labels for s in sets]),
            first.fidelity,
            first.noise_sd,
            first.columns,
            first.fields,
        )


def sample_dataset(
    solution: GridSolution, n: int, noise_sd: float = 0.0, seed: int | Sequence[int] = 0
) -> LabeledSet:
    """Pick ``n`` distinct grid nodes and label them, adding Gaussian noise if asked."""
    if n < 0 or n > solution.n_points:
        raise ContractError(
            f"cannot draw {n} samples from a grid of {solution.n_points} nodes"
        )
    if noise_sd < 0 or not np.isfinite(noise_sd):
        raise ContractError(f"noise_sd must be finite and non-negative, got {noise_sd}")
    rng = np.random.default_rng(seed)
    index = rng.choice(solution.n_points, size=n, replace=False)
    points = solution.points()[index]
    labels = solution.values()[index]
    if noise_sd > 0:
        labels = labels + noise_sd * rng.standard_normal(labels.shape)
    return LabeledSet(
        points,
        labels,
        solution.fidelity,
        float(noise_sd),
        tuple(solution.axes) + (solution.param_name,),
        tuple(solution.fields),
    )


@dataclass
class FidelityDataset:
    """Everything the training stages consume for one experiment."""

    hf: LabeledSet
    collocation: CollocationSet
    lf: LabeledSet | None = None

    @property
    def has_lf(self) -> bool:
        return self.lf is not None and len(self.lf) > 0
