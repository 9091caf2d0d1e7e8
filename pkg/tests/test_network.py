import numpy as np
import pytest

from autodiff.derivatives import eval_with_derivatives
from errors import ConfigError, ContractError
from helpers import interior_points, tiny_model
from network.composite import (
    NetworkSpecs,
    default_specs,
    forward_lf,
    forward_mf,
    init_params,
)
from network.mlp import MlpSpec, glorot_init


def test_default_architecture_parameter_count():
    specs = default_specs(3)
    assert specs.n_params == 42660
    assert abs(specs.n_params - 42100) / 42100 < 0.05
    assert specs.lf.layer_widths == (3,) + (64,) * 7 + (1,)
    assert specs.lin.activations.count("relu") == 1
    assert specs.nl.activations[:2] == ("sin", "tanh")
    assert specs.gate.output_dim == 1


def test_specs_round_trip_through_dict():
    specs = default_specs(4, 3)
    assert NetworkSpecs.from_dict(specs.to_dict()) == specs


def test_mlp_spec_validation():
    with pytest.raises(ContractError):
        MlpSpec((3, 4, 1), ("tanh",))
    with pytest.raises(ConfigError):
        MlpSpec((3, 1), ("gelu",))


def test_init_is_deterministic_per_seed(burgers):
    a = tiny_model(burgers, seed=5)
    b = tiny_model(burgers, seed=5)
    c = tiny_model(burgers, seed=6)
    np.testing.assert_array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)


def test_glorot_variance_of_wide_layer():
    spec = MlpSpec((64, 64, 1), ("tanh", "identity"))
    theta = glorot_init(spec, np.random.default_rng(0))
    weights = theta[: 64 * 64]
    target = 2.0 / (64 + 64)
    assert abs(weights.var() - target) / target < 0.25
    np.testing.assert_array_equal(theta[64 * 64 : 64 * 64 + 64], 0.0)


def test_flat_view_round_trip(burgers_model):
    blocks = burgers_model.blocks
    replacement = np.arange(blocks["nl"].stop - blocks["nl"].start, dtype=float)
    burgers_model.params[blocks["nl"]] = replacement
    np.testing.assert_array_equal(burgers_model.block("nl"), replacement)
    assert blocks["gate"].stop == burgers_model.n_params


def test_initial_gate_is_close_to_half(burgers):
    model = init_params(
        default_specs(burgers.input_dim),
        0,
        input_lo=burgers.input_lo,
        input_hi=burgers.input_hi,
        log_axes=burgers.log_axes,
    )
    alpha = forward_mf(model, interior_points(burgers, 200, 0.01)).alpha
    assert np.all((alpha > 0.45) & (alpha < 0.55))


def test_zero_gate_gives_exact_half(burgers_model, burgers):
    burgers_model.params[burgers_model.blocks["gate"]] = 0.0
    alpha = forward_mf(burgers_model, interior_points(burgers, 10, 0.05)).alpha
    np.testing.assert_array_equal(alpha, 0.5)


def test_zero_lf_network_outputs_zero(burgers_model, burgers):
    burgers_model.params[burgers_model.blocks["lf"]] = 0.0
    out = forward_lf(burgers_model, interior_points(burgers, 5, 0.01))
    np.testing.assert_array_equal(out, 0.0)


def test_zero_corrections_reproduce_lf(burgers_model, burgers):
    blocks = burgers_model.blocks
    burgers_model.params[blocks["lin"]] = 0.0
    burgers_model.params[blocks["nl"]] = 0.0
    out = forward_mf(burgers_model, interior_points(burgers, 8, 0.01))
    np.testing.assert_allclose(out.u_mf, out.u_lf, rtol=0, atol=0)


def test_lf_matches_hand_rolled_forward_pass(burgers_model, burgers):
    points = interior_points(burgers, 6, 0.02, seed=4)
    lo, hi = burgers.input_lo.copy(), burgers.input_hi.copy()
    x = points.copy()
    x[:, 2] = np.log(x[:, 2])
    lo[2], hi[2] = np.log(lo[2]), np.log(hi[2])
    h = 2.0 * (x - lo) / (hi - lo) - 1.0

    spec = burgers_model.specs.lf
    theta = burgers_model.block("lf")
    cursor = 0
    for fan_in, fan_out in spec.layer_shapes:
        weight = theta[cursor : cursor + fan_in * fan_out].reshape(fan_in, fan_out)
        cursor += fan_in * fan_out
        bias = theta[cursor : cursor + fan_out]
        cursor += fan_out
        h = h @ weight + bias
        if cursor < theta.size:
            h = np.tanh(h)
    np.testing.assert_allclose(
        forward_lf(burgers_model, points), h, rtol=1e-12, atol=1e-12
    )


def test_batched_equals_single_evaluation(burgers_model, burgers):
    points = interior_points(burgers, 5, 0.01)
    batched = forward_mf(burgers_model, points).u_mf
    singles = np.vstack([forward_mf(burgers_model, p).u_mf for p in points])
    np.testing.assert_allclose(batched, singles, rtol=1e-12, atol=1e-14)


def test_recomposition_and_convexity(heat_model, heat):
    out = forward_mf(heat_model, interior_points(heat, 50, 2.0))
    correction = out.alpha * out.u_lin + (1 - out.alpha) * out.u_nl
    np.testing.assert_allclose(out.u_mf, out.u_lf + correction, rtol=1e-13, atol=1e-15)
    assert np.all((out.alpha > 0) & (out.alpha < 1))
    lower = np.minimum(out.u_lin, out.u_nl) - 1e-12
    upper = np.maximum(out.u_lin, out.u_nl) + 1e-12
    assert np.all((correction >= lower) & (correction <= upper))


def test_error_decomposition_identity(heat_model, heat):
    out = forward_mf(heat_model, interior_points(heat, 30, 0.5))
    d = np.random.default_rng(9).normal(size=out.u_mf.shape)
    left = out.u_mf - (out.u_lf + d)
    right = out.alpha * (out.u_lin - d) + (1 - out.alpha) * (out.u_nl - d)
    np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("mode, expected", [("linear", 1.0), ("nonlinear", 0.0)])
def test_fixed_gate_modes(burgers, mode, expected):
    model = tiny_model(burgers, gate_mode=mode)
    out = forward_mf(model, interior_points(burgers, 4, 0.01))
    np.testing.assert_array_equal(out.alpha, expected)
    chosen = out.u_lin if expected == 1.0 else out.u_nl
    np.testing.assert_allclose(out.u_mf, out.u_lf + chosen, rtol=1e-13)


def test_unknown_gate_mode_is_config_error(burgers):
    with pytest.raises(ConfigError):
        tiny_model(burgers, gate_mode="soft")


def test_dimension_mismatch(burgers_model):
    with pytest.raises(ContractError):
        forward_lf(burgers_model, np.zeros((3, 2)) + 0.5)


def test_composite_input_derivatives_match_finite_differences(burgers_model, burgers):
    point = interior_points(burgers, 1, 0.02, seed=11)[0]
    out = eval_with_derivatives(burgers_model, point, "mf", tracked=(0, 1))

    def value(p):
        return forward_mf(burgers_model, p).u_mf[0, 0]

    h = 1e-5
    for k in range(2):
        step = np.zeros(3)
        step[k] = h
        fd = (value(point + step) - value(point - step)) / (2 * h)
        assert out.gradient[k] == pytest.approx(fd, rel=1e-5, abs=1e-8)
    assert out.hessian.shape == (2, 2)
    assert out.hessian[0, 1] == out.hessian[1, 0]
