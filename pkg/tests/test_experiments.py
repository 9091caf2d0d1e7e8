import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from analytics.plot_data import emit_plot_data
from errors import ArtifactError, ConfigError, ContractError, NumericError
from helpers import interior_points, tiny_model
from network.composite import forward_mf
from services.pipeline import run_experiment, run_sweep
from services.schemas import ExperimentConfig, SweepSettings, load_config
from storage.artifacts import read_table, write_table
from tools.cli import exit_code, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ARTIFACTS = (
    "config.json",
    "run.log",
    "datasets_hf.csv",
    "datasets_lf.csv",
    "collocation.csv",
    "checkpoint_lf.npz",
    "checkpoint_mf.npz",
    "training_log.csv",
    "ensemble.csv",
    "ensemble_params.npz",
    "predictive.csv",
    "alpha.csv",
    "mre_by_mu.csv",
    "solver_study.csv",
    "timings.csv",
    "metrics.csv",
)


def _write_config(tmp_path, **changes):
    data = json.loads((CONFIGS / "heat_minimal.json").read_text())
    data.update(changes)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data))
    return path


def test_shipped_configs_validate():
    for path in sorted(CONFIGS.glob("*.json")):
        cfg = load_config(path)
        assert len(cfg.config_hash()) == 8


def test_config_round_trip_and_hash():
    cfg = load_config(CONFIGS / "heat_minimal.json")
    again = ExperimentConfig.parse(cfg.model_dump(mode="json"))
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()
    moved = ExperimentConfig.parse(cfg.model_dump(mode="json"), output_dir="elsewhere")
    assert moved.config_hash() == cfg.config_hash()
    reseeded = ExperimentConfig.parse(cfg.model_dump(mode="json"), seed=1)
    assert reseeded.config_hash() != cfg.config_hash()


def test_config_rejects_unknown_and_inconsistent_fields(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path, learning_rate=0.1))
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path, problem="wave"))
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path, init_checkpoint="missing.npz"))
    bayes = {"chains": 2, "warmup": 100, "samples": 10, "subsample": 5000}
    with pytest.raises(ConfigError):
        load_config(_write_config(tmp_path, bayes=bayes))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_cli_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", str(CONFIGS / "heat_minimal.json")]) == 0
    assert "heat" in capsys.readouterr().out
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["validate", str(broken)]) == 2


def test_exit_code_mapping():
    assert exit_code(ConfigError("x")) == 2
    assert exit_code(NumericError("x", term="hf")) == 3
    assert exit_code(ArtifactError("x", stage="evaluate")) == 5
    assert exit_code(ContractError("x")) == 1


def test_plot_data_needs_artifacts(tmp_path):
    with pytest.raises(ArtifactError) as info:
        emit_plot_data(tmp_path, "fig2")
    assert info.value.stage == "evaluate"
    with pytest.raises(ContractError):
        emit_plot_data(tmp_path, "fig9")
    assert main(["plots", str(tmp_path), "fig3"]) == 5


def test_untrained_gate_sits_near_one_half(tmp_path, heat):
    """A freshly initialised gate mixes both branches evenly."""
    model = tiny_model(heat)
    points = interior_points(heat, 200, 1.0)
    alpha = np.asarray(forward_mf(model, points).alpha).reshape(-1)
    write_table(pd.DataFrame({"mu": 1.0, "alpha": alpha}), tmp_path / "alpha.csv")

    histogram = read_table(emit_plot_data(tmp_path, "fig1"))
    assert histogram["count"].sum() == 200
    occupied = histogram[histogram["count"] > 0]
    assert occupied["bin_lo"].min() >= 0.45 - 1e-9
    assert occupied["bin_hi"].max() <= 0.55 + 1e-9


def test_stage_cost_shares(tmp_path):
    timings = pd.DataFrame({"stage": ["data", "train"], "seconds": [1.0, 3.0]})
    write_table(timings, tmp_path / "timings.csv")
    shares = read_table(emit_plot_data(tmp_path, "fig3"))
    assert shares["share"].tolist() == [0.25, 0.75]


@pytest.mark.slow
def test_heat_minimal_end_to_end(tmp_path):
    cfg = load_config(CONFIGS / "heat_minimal.json")
    result = run_experiment(cfg, tmp_path / "a")
    for name in ARTIFACTS:
        assert (result.directory / name).exists(), name

    metrics = result.metrics
    assert np.isfinite(metrics["mre"].iloc[0])
    assert 0.0 <= metrics["coverage_95"].iloc[0] <= 100.0
    assert set(read_table(result.directory / "timings.csv")["stage"]) == {
        "data",
        "pretrain",
        "train",
        "sample",
        "evaluate",
    }

    fig2 = read_table(emit_plot_data(result.directory, "fig2"))
    assert list(fig2.columns) == ["mu", "mre", "in_range"]
    fig4 = read_table(emit_plot_data(result.directory, "fig4"))
    assert fig4["method"].tolist() == ["FD-16", "FD-32", "FD-64", "MF-BPINN"]
    assert fig4["mre"].iloc[0] > fig4["mre"].iloc[2]

    again = run_experiment(cfg, tmp_path / "b")
    first = (result.directory / "metrics.csv").read_bytes()
    assert (again.directory / "metrics.csv").read_bytes() == first

    with pytest.raises(ArtifactError) as info:
        run_experiment(cfg, tmp_path / "a")
    assert info.value.stage == "setup"


@pytest.mark.slow
def test_sample_efficiency_sweep_schema(tmp_path):
    cfg = load_config(CONFIGS / "heat_sample_efficiency.json")
    small = cfg.model_copy(
        update={
            "sweep": cfg.sweep.model_copy(update={"n_hf": [20, 80], "seeds": [0]}),
            "train": load_config(CONFIGS / "heat_minimal.json").train,
        }
    )
    result = run_sweep(small, tmp_path)
    metrics = result.metrics
    assert list(metrics.columns) == ["n_hf", "mre_mf", "mre_pinn_hf", "gap"]
    assert metrics["n_hf"].tolist() == [20, 80]
    assert np.isfinite(metrics[["mre_mf", "mre_pinn_hf"]].to_numpy()).all()
    runs = read_table(result.directory / "sweep_runs.csv")
    assert len(runs) == 4


def _reseeded(cfg, seed):
    return ExperimentConfig.parse(cfg.model_dump(mode="json"), seed=seed)


@pytest.mark.slow
@pytest.mark.parametrize(
    "name, bound", [("heat_desk.json", 0.03), ("burgers_desk.json", 0.05)]
)
def test_end_to_end_accuracy(tmp_path, name, bound):
    result = run_experiment(load_config(CONFIGS / name), tmp_path)
    row = result.metrics.iloc[0]
    assert row["in_range"]
    assert row["mre"] <= bound


@pytest.mark.slow
def test_ablations_never_beat_the_full_model(tmp_path):
    result = run_sweep(load_config(CONFIGS / "heat_ablation.json"), tmp_path)
    mre = result.metrics.set_index("variant")["mre_mean"]
    ablations = mre.drop("full")
    assert (mre["full"] <= ablations).all(), mre.to_dict()
    assert ablations.idxmax() == "no_residual"


def _sample_efficiency_configs():
    heat = load_config(CONFIGS / "heat_sample_efficiency.json")
    burgers = load_config(CONFIGS / "burgers_desk.json").model_copy(
        update={"bayes": None, "sweep": SweepSettings(kind="sample_efficiency")}
    )
    return [heat, burgers]


@pytest.mark.slow
@pytest.mark.parametrize("index", [0, 1], ids=["heat", "burgers"])
def test_multi_fidelity_wins_when_hf_data_is_scarce(tmp_path, index):
    cfg = _sample_efficiency_configs()[index]
    metrics = run_sweep(cfg, tmp_path).metrics.sort_values("n_hf")
    assert metrics["n_hf"].tolist() == [100, 200, 400, 800]
    first = metrics.iloc[0]
    assert first["mre_mf"] < first["mre_pinn_hf"]
    assert (np.diff(metrics["mre_mf"].to_numpy()) <= 0).all(), metrics.to_dict("list")
    widening = np.diff(metrics["gap"].to_numpy()) > 0
    assert widening.sum() <= 1, metrics.to_dict("list")


@pytest.mark.slow
def test_noisy_heat_is_calibrated_and_uncertain_off_range(tmp_path):
    cfg = load_config(CONFIGS / "heat_calibration.json")
    assert cfg.data.hf_noise_sd == 0.05
    rows = []
    for seed in (0, 1, 2):
        result = run_experiment(_reseeded(cfg, seed), tmp_path)
        rows.append(result.metrics)
    metrics = pd.concat(rows, ignore_index=True)

    first = metrics[(metrics["seed"] == 0) & metrics["in_range"]].iloc[0]
    assert 88.0 <= first["coverage_95"] <= 99.0
    assert first["ece"] <= 0.10

    epistemic = metrics.groupby("in_range")["epistemic_mean"].mean()
    assert epistemic[False] > epistemic[True]
