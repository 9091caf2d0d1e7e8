"""Fully connected networks evaluated on second-order jets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from autodiff import jets
from autodiff.activations import get_activation
from autodiff.jets import Scalar2
from autodiff.tape import Tensor, as_tensor
from errors import ContractError, NumericError


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input first, output last) and one activation per affine map.

    Parameters are stored flat, layer by layer, as the row-major ``(fan_in, fan_out)``
    weight matrix followed by the bias.
    """

    layer_widths: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self) -> None:
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.layer_widths) < 2:
            raise ContractError("an MLP needs at least an input and an output width")
        if any(w < 1 for w in self.layer_widths):
            raise ContractError(f"layer widths must be positive: {self.layer_widths}")
        if len(self.activations) != len(self.layer_widths) - 1:
            raise ContractError(
                f"{len(self.layer_widths) - 1} affine maps need as many activations, "
                f"got {len(self.activations)}"
            )
        for name in self.activations:
            get_activation(name)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_widths[:-1], self.layer_widths[1:]))

    @property
    def n_params(self) -> int:
        return sum(fan_in * fan_out + fan_out for fan_in, fan_out in self.layer_shapes)

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activations": list(self.activations),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpSpec":
        return cls(tuple(data["layer_widths"]), tuple(data["activations"]))


def glorot_init(
    spec: MlpSpec, rng: np.random.Generator, output_gain: float = 1.0
) -> np.ndarray:
    """Glorot-uniform weights and zero biases; ``output_gain`` scales the last layer."""
    chunks = []
    shapes = spec.layer_shapes
    for i, (fan_in, fan_out) in enumerate(shapes):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        if i == len(shapes) - 1:
            weight *= output_gain
        chunks.append(weight.ravel())
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def mlp_forward(
    spec: MlpSpec, theta, x: Scalar2, offset: int = 0, name: str = "mlp"
) -> Scalar2:
    """Evaluate the network whose parameters start at ``theta[offset]``."""
    theta = as_tensor(theta)
    if x.width != spec.input_dim:
        raise ContractError(
            f"{name}: input width {x.width} does not match input_dim {spec.input_dim}"
        )
    cursor = offset
    out = x
    for layer, ((fan_in, fan_out), activation) in enumerate(
        zip(spec.layer_shapes, spec.activations)
    ):
        weight = theta[cursor : cursor + fan_in * fan_out].reshape((fan_in, fan_out))
        cursor += fan_in * fan_out
        bias = theta[cursor : cursor + fan_out]
        cursor += fan_out
        out = jets.activate(jets.affine(out, weight, bias), activation)
        if not out.all_finite():
            raise NumericError(
                f"{name}: non-finite activations in layer {layer}", layer=layer
            )
    return out


def mlp_values(spec: MlpSpec, params: np.ndarray, inputs) -> np.ndarray:
    """Plain forward pass returning an ``(N, output_dim)`` array."""
    x = jets.constant(np.atleast_2d(np.asarray(inputs, dtype=float)))
    return mlp_forward(spec, Tensor(params), x).value.data


def stacked_specs(
    input_dim: int,
    output_dim: int,
    width: int,
    n_layers: int,
    activations: Sequence[str],
) -> MlpSpec:
    """``n_layers`` square hidden maps of ``width`` between input and output.

    ``activations`` lists one activation per hidden layer (``n_layers + 1`` entries);
    the output map is always linear.
    """
    if len(activations) != n_layers + 1:
        raise ContractError(
            f"expected {n_layers + 1} hidden activations, got {len(activations)}"
        )
    widths = (input_dim,) + (width,) * (n_layers + 1) + (output_dim,)
    return MlpSpec(widths, tuple(activations) + ("identity",))
