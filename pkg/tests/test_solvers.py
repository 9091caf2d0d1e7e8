import numpy as np
import pytest

from errors import ConfigError, ContractError
from pde.oracles import cole_hopf_burgers, heat_oracle, taylor_green
from solvers.burgers_fd import solve_burgers_fd
from solvers.datasets import LabeledSet, sample_dataset
from solvers.grid import GridSolution
from solvers.heat_fd import solve_heat_fd
from solvers.taylor_green import solve_taylor_green


def _burgers_error(nx, nu=0.1, t_index=50):
    solution = solve_burgers_fd(nu, nx)
    x, t = solution.axes["x"], solution.axes["t"][t_index]
    exact = cole_hopf_burgers(x, np.full_like(x, t), nu)["u"]
    numeric = solution.fields["u"][:, t_index]
    return np.linalg.norm(numeric - exact) / np.linalg.norm(exact), t


def _heat_error(n, k=1.0):
    solution = solve_heat_fd(k, n)
    return np.max(np.abs(solution.values() - heat_oracle(solution.points())))


def test_burgers_fd_matches_cole_hopf():
    error, t = _burgers_error(512)
    assert t == pytest.approx(0.5)
    assert error <= 1e-3


def test_burgers_coarse_grid_is_less_accurate():
    assert _burgers_error(32)[0] > _burgers_error(512)[0]


def test_burgers_zero_initial_state_stays_zero():
    solution = solve_burgers_fd(0.05, 64, u0=np.zeros(64))
    np.testing.assert_array_equal(solution.fields["u"], 0.0)
    assert solution.shape == (64, 101)
    assert solution.metadata["runtime_s"] >= 0


def test_burgers_unstable_step_is_config_error():
    with pytest.raises(ConfigError):
        solve_burgers_fd(0.1, 512, nt=100)


@pytest.mark.parametrize("kwargs", [{"nu": 0.1, "nx": 4}, {"nu": -0.1, "nx": 64}])
def test_burgers_rejects_bad_arguments(kwargs):
    with pytest.raises(ContractError):
        solve_burgers_fd(**kwargs)


def test_heat_fd_matches_manufactured_solution():
    assert _heat_error(256) <= 1e-3


def test_heat_fd_second_order_convergence():
    sizes = np.array([64, 128, 256])
    errors = np.array([_heat_error(n) for n in sizes])
    slope = -np.polyfit(np.log(sizes), np.log(errors), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_heat_fd_zero_source_gives_zero_field():
    solution = solve_heat_fd(2.0, 16, source=lambda x, y, k: np.zeros_like(x))
    np.testing.assert_array_equal(solution.fields["u"], 0.0)


def test_heat_low_fidelity_is_clearly_worse():
    assert _heat_error(32) >= 3 * _heat_error(256)


def test_heat_solution_boundary_and_layout():
    solution = solve_heat_fd(0.5, 16, fidelity="LF")
    u = solution.fields["u"]
    assert u.shape == (17, 17)
    assert solution.fidelity == "LF"
    for edge in (u[0], u[-1], u[:, 0], u[:, -1]):
        np.testing.assert_array_equal(edge, 0.0)
    np.testing.assert_array_equal(solution.points()[:, -1], 0.5)


def test_taylor_green_fidelities():
    hf = solve_taylor_green(40.0, n=32, nt=5)
    lf = solve_taylor_green(40.0, n=32, nt=5, fidelity="LF")
    assert hf.shape == lf.shape == (32, 32, 5)
    assert set(hf.fields) == {"u", "v", "p"}
    np.testing.assert_allclose(hf.values(), taylor_green(hf.points()), atol=1e-12)
    gap = np.abs(lf.values() - hf.values()).max()
    assert 0 < gap < 0.5


def test_grid_solution_contracts():
    axes = {"x": np.linspace(0, 1, 4), "t": np.linspace(0, 1, 3)}
    with pytest.raises(ContractError):
        GridSolution(axes, {"u": np.zeros((3, 4))}, 0.1, "nu", "HF")
    with pytest.raises(ContractError):
        GridSolution(axes, {"u": np.zeros((4, 3))}, 0.1, "nu", "MF")


def test_grid_interpolation_at_nodes():
    solution = solve_heat_fd(1.0, 16)
    np.testing.assert_allclose(
        solution.interpolate(solution.points()), solution.values(), atol=1e-12
    )


def test_noise_free_dataset_has_exact_labels():
    solution = solve_heat_fd(1.0, 32)
    data = sample_dataset(solution, 50, noise_sd=0.0, seed=1)
    assert len(data) == 50
    assert data.columns == ("x", "y", "k")
    grid = dict(zip(map(tuple, solution.points()), solution.values()[:, 0]))
    np.testing.assert_array_equal(
        data.labels[:, 0], [grid[tuple(p)] for p in data.points]
    )
    assert len({tuple(p) for p in data.points}) == 50


def test_dataset_noise_has_requested_spread():
    solution = solve_heat_fd(1.0, 128)
    clean = sample_dataset(solution, 10_000, noise_sd=0.0, seed=4)
    noisy = sample_dataset(solution, 10_000, noise_sd=0.1, seed=4)
    np.testing.assert_array_equal(clean.points, noisy.points)
    spread = np.std(noisy.labels - clean.labels)
    assert 0.097 <= spread <= 0.103


def test_dataset_is_deterministic_per_seed():
    solution = solve_heat_fd(1.0, 16)
    a = sample_dataset(solution, 20, 0.05, seed=(7, 1, 0))
    b = sample_dataset(solution, 20, 0.05, seed=(7, 1, 0))
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_dataset_size_and_noise_validation():
    solution = solve_heat_fd(1.0, 8)
    with pytest.raises(ContractError):
        sample_dataset(solution, solution.n_points + 1)
    with pytest.raises(ContractError):
        sample_dataset(solution, 5, noise_sd=-1.0)


def test_labeled_set_frame_and_concat():
    solution = solve_heat_fd(1.0, 8)
    data = sample_dataset(solution, 10, seed=2)
    restored = LabeledSet.from_frame(data.to_frame(), data.columns, data.fields)
    np.testing.assert_array_equal(restored.points, data.points)
    assert restored.fidelity == "HF"
    joined = LabeledSet.concat([data, None, data.subset(slice(0, 3))])
    assert len(joined) == 13
    with pytest.raises(ContractError):
        LabeledSet.from_frame(data.to_frame().drop(columns="u"), data.columns, ("u",))
