"""Gated multi-fidelity composite of four fully connected networks.

``u_mf = u_lf + alpha * u_lin + (1 - alpha) * u_nl`` where ``alpha = sigmoid(gate(z))``
and ``z`` stacks the normalized inputs with the raw low-fidelity prediction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from autodiff import jets
from autodiff.activations import log as log_family
from autodiff.activations import sigmoid as sigmoid_family
from autodiff.jets import Scalar2
from autodiff.tape import Tensor, as_tensor
from errors import ConfigError, ContractError
from network.mlp import MlpSpec, glorot_init, mlp_forward, stacked_specs

logger = logging.getLogger(__name__)

BLOCKS = ("lf", "lin", "nl", "gate")
GATE_MODES = ("adaptive", "constant", "linear", "nonlinear")
# fixed gate values for the non-adaptive baselines
FIXED_ALPHA = {"constant": 0.5, "linear": 1.0, "nonlinear": 0.0}
GATE_OUTPUT_GAIN = 1e-2


@dataclass(frozen=True)
class NetworkSpecs:
    lf: MlpSpec
    lin: MlpSpec
    nl: MlpSpec
    gate: MlpSpec

    def __post_init__(self) -> None:
        feature_dim = self.lf.input_dim + self.lf.output_dim
        for name in ("lin", "nl", "gate"):
            spec = getattr(self, name)
            if spec.input_dim != feature_dim:
                raise ContractError(
                    f"{name} net expects {spec.input_dim} inputs, "
                    f"features have {feature_dim}"
                )
        for name in ("lin", "nl"):
            if getattr(self, name).output_dim != self.lf.output_dim:
                raise ContractError(f"{name} net output must match the LF output")
        if self.gate.output_dim != 1:
            raise ContractError("gate net must have a single output")

    def __getitem__(self, name: str) -> MlpSpec:
        return getattr(self, name)

    @property
    def n_params(self) -> int:
        return sum(self[name].n_params for name in BLOCKS)

    def to_dict(self) -> dict:
        return {name: self[name].to_dict() for name in BLOCKS}

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpecs":
        return cls(**{name: MlpSpec.from_dict(data[name]) for name in BLOCKS})


def default_specs(
    input_dim: int,
    output_dim: int = 1,
    widths: dict[str, int] | None = None,
    layers: dict[str, int] | None = None,
) -> NetworkSpecs:
    """Default architecture: LF 6x64 tanh, linear 4x32, nonlinear 5x48, gate 3x16."""
    widths = {"lf": 64, "lin": 32, "nl": 48, "gate": 16, **(widths or {})}
    layers = {"lf": 6, "lin": 4, "nl": 5, "gate": 3, **(layers or {})}
    feature_dim = input_dim + output_dim

    n_lin = layers["lin"] + 1
    lin_acts = ["identity"] * n_lin
    lin_acts[n_lin // 2] = "relu"
    n_nl = layers["nl"] + 1
    nl_acts = ["sin" if i % 2 == 0 else "tanh" for i in range(n_nl)]
    lf_acts = ["tanh"] * (layers["lf"] + 1)
    gate_acts = ["sigmoid"] * (layers["gate"] + 1)

    return NetworkSpecs(
        lf=stacked_specs(input_dim, output_dim, widths["lf"], layers["lf"], lf_acts),
        lin=stacked_specs(
            feature_dim, output_dim, widths["lin"], layers["lin"], lin_acts
        ),
        nl=stacked_specs(feature_dim, output_dim, widths["nl"], layers["nl"], nl_acts),
        gate=stacked_specs(feature_dim, 1, widths["gate"], layers["gate"], gate_acts),
    )


class MfJets(NamedTuple):
    u_mf: Scalar2
    alpha: Scalar2
    u_lf: Scalar2
    u_lin: Scalar2
    u_nl: Scalar2


class MfOutput(NamedTuple):
    u_mf: np.ndarray
    alpha: np.ndarray
    u_lf: np.ndarray
    u_lin: np.ndarray
    u_nl: np.ndarray


@dataclass
class MfModel:
    """Parameters and normalization of the four-network composite.

    ``params`` is one flat vector laid out as ``lf | lin | nl | gate``. Physical
    inputs are mapped to ``[-1, 1]`` per axis; axes flagged in ``log_axes`` are
    mapped in log space.
    """

    specs: NetworkSpecs
    params: np.ndarray
    input_lo: np.ndarray
    input_hi: np.ndarray
    log_axes: tuple[bool, ...] = ()
    gate_mode: str = "adaptive"
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype=float)
        self.input_lo = np.asarray(self.input_lo, dtype=float)
        self.input_hi = np.asarray(self.input_hi, dtype=float)
        if not self.log_axes:
            self.log_axes = (False,) * self.input_dim
        self.log_axes = tuple(bool(flag) for flag in self.log_axes)
        if self.params.shape != (self.specs.n_params,):
            raise ContractError(
                f"parameter vector has shape {self.params.shape}, "
                f"architecture needs ({self.specs.n_params},)"
            )
        expected = (self.input_dim,)
        if self.input_lo.shape != expected or self.input_hi.shape != expected:
            raise ContractError("input bounds must have one entry per input axis")
        if len(self.log_axes) != self.input_dim:
            raise ContractError("log_axes must have one flag per input axis")
        if np.any(self.input_hi <= self.input_lo):
            raise ContractError("input bounds must satisfy lo < hi")
        if any(flag and lo <= 0 for flag, lo in zip(self.log_axes, self.input_lo)):
            raise ContractError("log-scaled axes need positive bounds")
        if self.gate_mode not in GATE_MODES:
            raise ConfigError(
                f"unknown gate mode {self.gate_mode!r}; expected {GATE_MODES}"
            )

    @property
    def input_dim(self) -> int:
        return self.specs.lf.input_dim

    @property
    def output_dim(self) -> int:
        return self.specs.lf.output_dim

    @property
    def n_params(self) -> int:
        return self.specs.n_params

    @property
    def blocks(self) -> dict[str, slice]:
        out, start = {}, 0
        for name in BLOCKS:
            stop = start + self.specs[name].n_params
            out[name] = slice(start, stop)
            start = stop
        return out

    def block(self, name: str) -> np.ndarray:
        return self.params[self.blocks[name]]

    def copy(self, params: np.ndarray | None = None) -> "MfModel":
        return replace(
            self,
            params=np.array(self.params if params is None else params, dtype=float),
            metadata=dict(self.metadata),
        )

    def normalize(self, x: Scalar2) -> Scalar2:
        """Map physical inputs onto ``[-1, 1]`` per axis, carrying derivatives."""
        if x.width != self.input_dim:
            raise ContractError(
                f"model takes {self.input_dim} inputs per point, got {x.width}"
            )
        lo = self.input_lo.copy()
        hi = self.input_hi.copy()
        if any(self.log_axes):
            log_cols = [i for i, flag in enumerate(self.log_axes) if flag]
            if np.any(x.value.data[:, log_cols] <= 0):
                raise ContractError("log-scaled inputs must be positive")
            logged = jets.apply(x, _partial_log(self.log_axes))
            lo[log_cols] = np.log(lo[log_cols])
            hi[log_cols] = np.log(hi[log_cols])
            x = logged
        factor = 2.0 / (hi - lo)
        return jets.shift(jets.scale(x, factor), -1.0 - lo * factor)


def _partial_log(log_axes: Sequence[bool]):
    mask = np.asarray(log_axes, dtype=bool)

    def family(z: np.ndarray, order: int) -> np.ndarray:
        out = np.empty_like(z)
        out[:, ~mask] = z[:, ~mask] if order == 0 else float(order == 1)
        if mask.any():
            out[:, mask] = log_family(z[:, mask], order)
        return out

    return family


def init_params(
    specs: NetworkSpecs,
    seed: int,
    *,
    input_lo: Sequence[float],
    input_hi: Sequence[float],
    log_axes: Sequence[bool] = (),
    gate_mode: str = "adaptive",
) -> MfModel:
    """Glorot-uniform weights and zero biases, deterministic in ``seed``.

    The gate's output layer is scaled down so alpha starts close to 0.5.
    """
    rng = np.random.default_rng(seed)
    chunks = [glorot_init(specs[name], rng) for name in ("lf", "lin", "nl")]
    chunks.append(glorot_init(specs.gate, rng, output_gain=GATE_OUTPUT_GAIN))
    model = MfModel(
        specs=specs,
        params=np.concatenate(chunks),
        input_lo=np.asarray(input_lo, dtype=float),
        input_hi=np.asarray(input_hi, dtype=float),
        log_axes=tuple(log_axes),
        gate_mode=gate_mode,
        seed=seed,
    )
    logger.debug(f"initialized {model.n_params} parameters with seed {seed}")
    return model


def _theta(model: MfModel, theta) -> Tensor:
    theta = Tensor(model.params) if theta is None else as_tensor(theta)
    if theta.shape != (model.n_params,):
        raise ContractError(
            f"parameter vector has shape {theta.shape}, model needs ({model.n_params},)"
        )
    return theta


def feature_vector(x_normalized: Scalar2, u_lf: Scalar2) -> Scalar2:
    """Correlator and gate input: normalized inputs followed by the LF prediction."""
    return jets.concat([x_normalized, u_lf])


def lf_jet(model: MfModel, points, tracked: Sequence[int] = (), theta=None) -> Scalar2:
    theta = _theta(model, theta)
    x = model.normalize(jets.lift_inputs(points, tracked))
    return mlp_forward(model.specs.lf, theta, x, model.blocks["lf"].start, "lf")


def mf_jets(model: MfModel, points, tracked: Sequence[int] = (), theta=None) -> MfJets:
    """All composite components as jets in the tracked physical coordinates."""
    theta = _theta(model, theta)
    blocks = model.blocks
    x = model.normalize(jets.lift_inputs(points, tracked))
    u_lf = mlp_forward(model.specs.lf, theta, x, blocks["lf"].start, "lf")
    z = feature_vector(x, u_lf)
    u_lin = mlp_forward(model.specs.lin, theta, z, blocks["lin"].start, "lin")
    u_nl = mlp_forward(model.specs.nl, theta, z, blocks["nl"].start, "nl")

    if model.gate_mode == "adaptive":
        logits = mlp_forward(model.specs.gate, theta, z, blocks["gate"].start, "gate")
        alpha = jets.apply(logits, sigmoid_family)
    else:
        n_points, n_tracked = x.n_points, x.n_tracked
        alpha = Scalar2(
            Tensor(np.full((n_points, 1), FIXED_ALPHA[model.gate_mode])),
            Tensor(np.zeros((n_points, n_tracked, 1))),
            Tensor(np.zeros((n_points, n_tracked, n_tracked, 1))),
        )

    correction = jets.add(jets.mul(u_lin, alpha), jets.mul(u_nl, jets.one_minus(alpha)))
    return MfJets(jets.add(u_lf, correction), alpha, u_lf, u_lin, u_nl)


def forward_lf(model: MfModel, points, theta=None) -> np.ndarray:
    return lf_jet(model, points, theta=theta).value.data


def forward_mf(model: MfModel, points, theta=None) -> MfOutput:
    """Values of every composite component at ``points`` (``(N, D)`` or ``(D,)``)."""
    out = mf_jets(model, points, theta=theta)
    return MfOutput(*(component.value.data for component in out))
