"""Gridded field solutions shared by the numerical solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from errors import ContractError

FIDELITIES = ("LF", "HF")


@dataclass
class GridSolution:
    """Field values on a tensor-product grid at one parameter value.

    ``axes`` is ordered; every field array has one dimension per axis.
    """

    axes: dict[str, np.ndarray]
    fields: dict[str, np.ndarray]
    mu: float
    param_name: str
    fidelity: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.fidelity not in FIDELITIES:
            raise ContractError(
                f"fidelity must be one of {FIDELITIES}, got {self.fidelity!r}"
            )
        shape = self.shape
        for name, values in self.fields.items():
            if np.shape(values) != shape:
                raise ContractError(
                    f"field {name!r} has shape {np.shape(values)}, grid is {shape}"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(values) for values in self.axes.values())

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> dict[str, float]:
        return {
            name: float(values[1] - values[0]) if len(values) > 1 else 0.0
            for name, values in self.axes.items()
        }

    def points(self) -> np.ndarray:
        """All grid nodes with the parameter appended, shape ``(P, D + 1)``."""
        mesh = np.meshgrid(*self.axes.values(), indexing="ij")
        coords = [m.reshape(-1) for m in mesh]
        coords.append(np.full(self.n_points, self.mu))
        return np.column_stack(coords)

    def values(self) -> np.ndarray:
        return np.column_stack([f.reshape(-1) for f in self.fields.values()])

    def interpolate(self, points: np.ndarray) -> np.ndarray:
        """Linear interpolation of every field; the parameter column is ignored."""
        coords = np.atleast_2d(points)[:, : len(self.axes)]
        grid = tuple(self.axes.values())
        columns = []
        for values in self.fields.values():
            interpolator = RegularGridInterpolator(
                grid, values, bounds_error=False, fill_value=None
            )
            columns.append(interpolator(coords))
        return np.column_stack(columns)

    def to_frame(self) -> pd.DataFrame:
        columns = list(self.axes) + [self.param_name]
        frame = pd.DataFrame(self.points(), columns=columns)
        for name, values in self.fields.items():
            frame[name] = values.reshape(-1)
        frame["fidelity"] = self.fidelity
        return frame
