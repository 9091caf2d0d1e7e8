"""Experiment orchestration: data, training, sampling, evaluation and artifacts."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

import config as settings
from bayes.calibration import calibration_report
from bayes.hmc import PosteriorEnsemble, hmc_sample
from bayes.likelihood import PosteriorTarget
from bayes.predictive import predictive_summary
from errors import ArtifactError, ContractError, MfBpinnError
from network.composite import MfModel, default_specs, forward_mf, init_params
from pde.problems import PdeProblem, get_problem
from pde.sampling import sample_points
from services.schemas import ExperimentConfig, load_config
from solvers import burgers_fd, heat_fd
from solvers.burgers_fd import solve_burgers_fd
from solvers.datasets import FidelityDataset, LabeledSet, sample_dataset
from solvers.grid import GridSolution
from solvers.heat_fd import solve_heat_fd
from solvers.taylor_green import solve_taylor_green
from storage.artifacts import write_json, write_table
from storage.checkpoints import load_checkpoint, save_checkpoint, save_ensemble
from training.metrics import (
    evaluate_mre,
    evaluation_points,
    mean_relative_error,
    predict,
)
from training.schemas import AblationFlags, TrainConfig
from training.stages import TrainReport, pretrain_lf, train_mf, train_single_fidelity

logger = logging.getLogger(__name__)

DEFAULT_MU = {"burgers": 0.01 / np.pi, "heat": 1.0, "navier_stokes": 50.0}
HF_RESOLUTION = {
    "burgers": burgers_fd.HF_POINTS,
    "heat": heat_fd.HF_CELLS,
    "navier_stokes": 64,
}
LF_RESOLUTION = {
    "burgers": burgers_fd.LF_POINTS,
    "heat": heat_fd.LF_CELLS,
    "navier_stokes": 64,
}
# the coarse Burgers grid keeps more time levels so the default LF sample fits
LF_SNAPSHOTS = 201
ABLATIONS = {
    "full": AblationFlags(),
    "no_gating": AblationFlags(no_gating=True),
    "no_lf_pretrain": AblationFlags(no_lf_pretrain=True),
    "no_residual": AblationFlags(no_residual=True),
}


@dataclass
class ExperimentData:
    problem: PdeProblem
    datasets: FidelityDataset
    train_mu: list[float]
    eval_mu: list[float]
    mu_range: tuple[float, float]


@dataclass
class RunResult:
    directory: Path
    metrics: pd.DataFrame
    status: str = "ok"
    timings: dict[str, float] = field(default_factory=dict)


def solve_grid(
    problem_name: str, mu: float, resolution: int, fidelity: str
) -> GridSolution:
    """Run the numerical solver of ``problem_name`` at one parameter value."""
    if problem_name == "burgers":
        snapshots = 101 if fidelity == "HF" else LF_SNAPSHOTS
        return solve_burgers_fd(
            mu, nx=resolution, n_snapshots=snapshots, fidelity=fidelity
        )
    if problem_name == "heat":
        return solve_heat_fd(mu, n=resolution, fidelity=fidelity)
    if problem_name == "navier_stokes":
        return solve_taylor_green(mu, n=resolution, fidelity=fidelity)
    raise ContractError(f"no solver for problem {problem_name!r}")


@contextmanager
def stage(name: str, timings: dict[str, float]):
    """Time a pipeline stage and tag numeric failures with its name."""
    started = time.perf_counter()
    logger.info(f"stage {name} started")
    try:
        yield
    except MfBpinnError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
        logger.error(f"stage {name} failed: {exc}")
        raise
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - started


@contextmanager
def run_log(directory: Path):
    handler = logging.FileHandler(directory / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter(settings.LOG_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield
    finally:
        root.removeHandler(handler)
        handler.close()


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (i < extra) for i in range(parts)]


def build_data(cfg: ExperimentConfig, seed: int) -> ExperimentData:
    """Solve the HF/LF grids, draw labeled samples and collocation points."""
    problem = get_problem(cfg.problem)
    train_mu = list(cfg.data.train_mu or [DEFAULT_MU[problem.name]])
    eval_mu = list(cfg.data.eval_mu or train_mu)
    mu_range = tuple(cfg.data.mu_range or (min(train_mu), max(train_mu)))
    hf_res = cfg.solver.hf_resolution or HF_RESOLUTION[problem.name]
    lf_res = cfg.solver.lf_resolution or LF_RESOLUTION[problem.name]

    hf_sets, lf_sets = [], []
    n_hf_each = _split(cfg.data.n_hf, len(train_mu))
    n_lf_each = _split(cfg.data.n_lf, len(train_mu))
    for i, (mu, n_hf, n_lf) in enumerate(zip(train_mu, n_hf_each, n_lf_each)):
        hf_grid = solve_grid(problem.name, mu, hf_res, "HF")
        hf_sets.append(
            sample_dataset(hf_grid, n_hf, cfg.data.hf_noise_sd, seed=[seed, 1, i])
        )
        if n_lf:
            lf_grid = solve_grid(problem.name, mu, lf_res, "LF")
            if n_lf > lf_grid.n_points:
                logger.warning(
                    f"LF grid at {problem.param_name}={mu:g} has "
                    f"{lf_grid.n_points} nodes, using all of them instead of {n_lf}"
                )
                n_lf = lf_grid.n_points
            lf_sets.append(
                sample_dataset(lf_grid, n_lf, cfg.data.lf_noise_sd, seed=[seed, 2, i])
            )

    collocation = sample_points(
        problem,
        cfg.train.collocation.counts,
        cfg.train.collocation.strategy,
        seed=np.random.default_rng([seed, 3]),
        param_range=mu_range,
    )
    datasets = FidelityDataset(
        hf=LabeledSet.concat(hf_sets),
        collocation=collocation,
        lf=LabeledSet.concat(lf_sets) if lf_sets else None,
    )
    n_lf_total = len(datasets.lf) if datasets.has_lf else 0
    logger.info(
        f"{problem.name}: {len(datasets.hf)} HF, {n_lf_total} LF, "
        f"{len(collocation.interior)} interior points, "
        f"{problem.param_name} in {mu_range}"
    )
    return ExperimentData(problem, datasets, train_mu, eval_mu, mu_range)


def build_model(
    cfg: ExperimentConfig, problem: PdeProblem, seed: int, ablation: AblationFlags
) -> MfModel:
    if cfg.init_checkpoint:
        model = load_checkpoint(Path(cfg.init_checkpoint))
        logger.info(f"warm start from {cfg.init_checkpoint}")
    else:
        specs = default_specs(
            problem.input_dim,
            problem.output_dim,
            widths=dict(cfg.network.widths) or None,
            layers=dict(cfg.network.layers) or None,
        )
        model = init_params(
            specs,
            seed,
            input_lo=problem.input_lo,
            input_hi=problem.input_hi,
            log_axes=problem.log_axes,
            gate_mode=cfg.network.gate_mode,
        )
    if ablation.no_gating:
        model.gate_mode = "constant"
    return model


def train_model(
    cfg: ExperimentConfig, data: ExperimentData, train: TrainConfig
) -> tuple[MfModel, MfModel | None, TrainReport]:
    """LF pre-training (unless ablated) then composite training.

    Returns the trained model, its state after pre-training and the merged report.
    """
    model = build_model(cfg, data.problem, train.seed, train.ablation)
    report = None
    snapshot = None
    pretrain = not train.ablation.no_lf_pretrain and data.datasets.has_lf
    if pretrain and train.lf_pretrain.epochs:
        report = pretrain_lf(model, data.datasets.lf, train)
        snapshot = model.copy()
    mf_report = train_mf(model, data.datasets, data.problem, train)
    report = mf_report if report is None else report.merge(mf_report)
    return model, snapshot, report


def experiment_dir(
    cfg: ExperimentConfig, output_root: str | Path | None = None, suffix: str = ""
) -> Path:
    root = Path(output_root or cfg.output_dir or settings.OUTPUT_ROOT)
    directory = root / f"{cfg.problem}-{cfg.config_hash()}-s{cfg.seed}{suffix}"
    if (directory / "metrics.csv").exists():
        raise ArtifactError(
            f"{directory} already holds results; remove it to rerun", stage="setup"
        )
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def held_out_set(
    problem: PdeProblem, mu: float, n: int, noise_sd: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform points in the problem box at ``mu`` with noisy oracle observations."""
    lower, upper = np.asarray(problem.lower), np.asarray(problem.upper)
    coords = lower + (upper - lower) * rng.random((n, len(lower)))
    points = np.column_stack([coords, np.full(n, float(mu))])
    truth = problem.oracle(points)
    if noise_sd > 0:
        truth = truth + noise_sd * rng.standard_normal(truth.shape)
    return points, truth


def solver_study(cfg: ExperimentConfig, problem: PdeProblem, mu: float) -> pd.DataFrame:
    """Runtime and accuracy of the numerical solver across resolutions."""
    fidelity = "LF" if problem.name == "navier_stokes" else "HF"
    rows = []
    for resolution in cfg.solver.study_resolutions:
        solution = solve_grid(problem.name, mu, resolution, fidelity)
        truth = problem.oracle(solution.points())
        rows.append(
            {
                "method": f"FD-{resolution}",
                "resolution": resolution,
                "runtime_s": solution.metadata["runtime_s"],
                "mre": mean_relative_error(solution.values(), truth),
            }
        )
    return pd.DataFrame(rows)


def _sample_posterior(
    cfg: ExperimentConfig, model: MfModel, data: ExperimentData
) -> tuple[PosteriorEnsemble, PosteriorTarget]:
    datasets = data.datasets
    physics = not cfg.train.ablation.no_residual
    target = PosteriorTarget(
        model,
        cfg.bayes,
        problem=data.problem if physics else None,
        hf=datasets.hf,
        lf=datasets.lf,
        collocation=datasets.collocation if physics else None,
    )
    ensemble = hmc_sample(target.initial_state(model.params), target, cfg.bayes)
    return ensemble, target


def _evaluate(
    cfg: ExperimentConfig,
    model: MfModel,
    lf_snapshot: MfModel | None,
    data: ExperimentData,
    ensemble: PosteriorEnsemble | None,
    target: PosteriorTarget | None,
    resolution: tuple[int, ...] | None,
) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    problem = data.problem
    lo, hi = data.mu_range
    rng = np.random.default_rng([cfg.seed, 4])
    rows, predictive_frames, alpha_frames = [], [], []
    for mu in data.eval_mu:
        points = evaluation_points(problem, mu, resolution)
        row = {
            "problem": problem.name,
            "seed": cfg.seed,
            "mu": mu,
            "in_range": bool(lo <= mu <= hi),
            "mre": mean_relative_error(predict(model, points), problem.oracle(points)),
            "mre_lf": np.nan,
            "coverage_95": np.nan,
            "ece": np.nan,
            "epistemic_mean": np.nan,
            "epistemic_share": np.nan,
            "rhat": np.nan,
            "min_ess": np.nan,
            "mean_acceptance": np.nan,
            "n_draws": 0,
            "status": "ok",
        }
        if lf_snapshot is not None:
            row["mre_lf"] = evaluate_mre(lf_snapshot, problem, mu, "lf", resolution)
        alpha = forward_mf(model, points).alpha
        alpha = np.asarray(alpha).reshape(-1)
        alpha_frames.append(pd.DataFrame({"mu": mu, "alpha": alpha}))

        if ensemble is not None and cfg.data.held_out:
            query, truth = held_out_set(
                problem, mu, cfg.data.held_out, cfg.data.hf_noise_sd, rng
            )
            summary = predictive_summary(
                ensemble,
                model,
                query,
                sigma_hf=target.fixed.get("hf"),
                seed=cfg.seed,
            )
            total = summary.total
            share = np.divide(
                summary.epistemic, total, out=np.zeros_like(total), where=total > 0
            )
            row.update(
                epistemic_mean=float(np.mean(summary.epistemic)),
                epistemic_share=float(np.mean(share)),
                rhat=float(ensemble.rhat),
                min_ess=float(np.min(ensemble.ess)),
                mean_acceptance=float(np.mean(ensemble.acceptance)),
                n_draws=summary.n_draws,
            )
            if len(query) >= 100:
                report = calibration_report(summary, truth)
                row.update(coverage_95=report.coverage_at_95, ece=report.ece)
            else:
                logger.warning(
                    f"only {len(query)} held-out points, skipping calibration"
                )
            if not summary.reliable or ensemble.flags:
                row["status"] = "flagged"
            predictive_frames.append(summary.to_frame(problem.columns, truth))
        rows.append(row)
        logger.info(f"{problem.param_name}={mu:g}: MRE {row['mre']:.4%}")

    predictive = (
        pd.concat(predictive_frames, ignore_index=True)
        if predictive_frames
        else pd.DataFrame()
    )
    alpha = pd.concat(alpha_frames, ignore_index=True)
    return pd.DataFrame(rows), predictive, alpha


def _seeded(cfg: ExperimentConfig) -> ExperimentConfig:
    """Derive the initialisation and chain seeds from the experiment seed."""
    update = {"train": cfg.train.model_copy(update={"seed": cfg.seed})}
    if cfg.bayes is not None:
        update["bayes"] = cfg.bayes.model_copy(update={"seed": cfg.seed})
    return cfg.model_copy(update=update)


def run_experiment(
    config: ExperimentConfig | str | Path, output_root: str | Path | None = None
) -> RunResult:
    """Run one configured experiment end to end and persist every artifact."""
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    if cfg.sweep is not None:
        return run_sweep(cfg, output_root)
    directory = experiment_dir(cfg, output_root)
    seeded = _seeded(cfg)
    timings: dict[str, float] = {}
    resolution = tuple(cfg.evaluation_resolution) if cfg.evaluation_resolution else None

    with run_log(directory):
        logger.info(
            f"experiment {cfg.name} ({cfg.config_hash()}) writing to {directory}"
        )
        write_json(cfg.model_dump(mode="json"), directory / "config.json")

        with stage("data", timings):
            data = build_data(cfg, cfg.seed)
            write_table(data.datasets.hf.to_frame(), directory / "datasets_hf.csv")
            if data.datasets.has_lf:
                write_table(data.datasets.lf.to_frame(), directory / "datasets_lf.csv")
            collocation = data.datasets.collocation.to_frame(data.problem.columns)
            write_table(collocation, directory / "collocation.csv")

        train = seeded.train
        with stage("pretrain", timings):
            model = build_model(cfg, data.problem, train.seed, train.ablation)
            lf_snapshot = None
            history = []
            if not train.ablation.no_lf_pretrain and data.datasets.has_lf:
                lf_report = pretrain_lf(model, data.datasets.lf, train)
                history.append(lf_report.history)
                lf_snapshot = model.copy()
                save_checkpoint(model, directory / "checkpoint_lf.npz", "lf")

        with stage("train", timings):
            report = train_mf(model, data.datasets, data.problem, train)
            history.append(report.history)
            save_checkpoint(model, directory / "checkpoint_mf.npz", "mf")
            log = pd.concat(history, ignore_index=True)
            write_table(log, directory / "training_log.csv")

        ensemble = target = None
        if cfg.bayes is not None:
            with stage("sample", timings):
                ensemble, target = _sample_posterior(seeded, model, data)
                save_ensemble(ensemble, directory)

        with stage("evaluate", timings):
            metrics, predictive, alpha = _evaluate(
                cfg, model, lf_snapshot, data, ensemble, target, resolution
            )
            if report.status == "diverged":
                metrics["status"] = "diverged"
            if not predictive.empty:
                write_table(predictive, directory / "predictive.csv")
            write_table(alpha, directory / "alpha.csv")
            write_table(metrics[["mu", "mre", "in_range"]], directory / "mre_by_mu.csv")
            study = solver_study(cfg, data.problem, data.eval_mu[0])
            write_table(study, directory / "solver_study.csv")

        write_table(
            pd.DataFrame({"stage": list(timings), "seconds": list(timings.values())}),
            directory / "timings.csv",
        )
        write_table(metrics, directory / "metrics.csv")
        logger.info(f"experiment finished in {sum(timings.values()):.1f}s")

    status = "ok" if (metrics["status"] == "ok").all() else "flagged"
    return RunResult(directory, metrics, status, timings)


def _sample_efficiency_job(cfg: ExperimentConfig, n_hf: int, seed: int) -> list[dict]:
    job = cfg.model_copy(update={"data": cfg.data.model_copy(update={"n_hf": n_hf})})
    data = build_data(job, seed)
    train = cfg.train.model_copy(update={"seed": seed})
    mu = data.eval_mu[0]
    model, _, _ = train_model(job, data, train)
    baseline = build_model(job, data.problem, seed, train.ablation)
    train_single_fidelity(baseline, data.datasets, data.problem, train)
    base = {"n_hf": n_hf, "seed": seed, "mu": mu}
    return [
        {**base, "method": "mf_pinn", "mre": evaluate_mre(model, data.problem, mu)},
        {
            **base,
            "method": "pinn_hf",
            "mre": evaluate_mre(baseline, data.problem, mu, "lf"),
        },
    ]


def _ablation_job(cfg: ExperimentConfig, variant: str, seed: int) -> list[dict]:
    data = build_data(cfg, seed)
    train = cfg.train.model_copy(update={"seed": seed, "ablation": ABLATIONS[variant]})
    model, _, _ = train_model(cfg, data, train)
    mu = data.eval_mu[0]
    mre = evaluate_mre(model, data.problem, mu)
    return [{"variant": variant, "seed": seed, "mu": mu, "mre": mre}]


def _parametric_job(cfg: ExperimentConfig, seed: int) -> list[dict]:
    data = build_data(cfg, seed)
    model, _, _ = train_model(cfg, data, cfg.train.model_copy(update={"seed": seed}))
    lo, hi = data.mu_range
    mu_values = cfg.sweep.mu_values or data.eval_mu
    return [
        {
            "seed": seed,
            "mu": mu,
            "in_range": bool(lo <= mu <= hi),
            "mre": evaluate_mre(model, data.problem, mu),
        }
        for mu in mu_values
    ]


def _sem(values: pd.Series) -> float:
    return float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0


def run_sweep(
    cfg: ExperimentConfig, output_root: str | Path | None = None
) -> RunResult:
    """Repeat training over sample sizes, ablation variants or parameter values."""
    sweep = cfg.sweep
    if sweep is None:
        raise ContractError("configuration has no sweep section")
    directory = experiment_dir(cfg, output_root, suffix=f"-{sweep.kind}")
    if sweep.kind == "sample_efficiency":
        jobs = [
            (_sample_efficiency_job, (cfg, n, s))
            for n in sweep.n_hf
            for s in sweep.seeds
        ]
    elif sweep.kind == "ablation":
        jobs = [(_ablation_job, (cfg, v, s)) for v in ABLATIONS for s in sweep.seeds]
    else:
        jobs = [(_parametric_job, (cfg, s)) for s in sweep.seeds]

    started = time.perf_counter()
    with run_log(directory):
        workers = min(len(jobs), settings.MAX_WORKERS)
        logger.info(f"{sweep.kind} sweep: {len(jobs)} runs on {workers} worker(s)")
        write_json(cfg.model_dump(mode="json"), directory / "config.json")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *args) for fn, args in jobs]
            rows = [row for future in futures for row in future.result()]
        runs = pd.DataFrame(rows)
        write_table(runs, directory / "sweep_runs.csv")

        if sweep.kind == "sample_efficiency":
            table = runs.pivot_table(
                index="n_hf", columns="method", values="mre", aggfunc="mean"
            )
            metrics = pd.DataFrame(
                {
                    "n_hf": table.index,
                    "mre_mf": table["mf_pinn"].to_numpy(),
                    "mre_pinn_hf": table["pinn_hf"].to_numpy(),
                }
            )
            metrics["gap"] = metrics["mre_pinn_hf"] - metrics["mre_mf"]
        elif sweep.kind == "ablation":
            metrics = (
                runs.groupby("variant", sort=False)["mre"]
                .agg(mre_mean="mean", mre_sem=_sem)
                .reset_index()
            )
        else:
            grouped = runs.groupby(["mu", "in_range"], as_index=False)["mre"].mean()
            metrics = grouped[["mu", "mre", "in_range"]]
            write_table(metrics, directory / "mre_by_mu.csv")

        timings = {"sweep": time.perf_counter() - started}
        write_table(
            pd.DataFrame({"stage": ["sweep"], "seconds": [timings["sweep"]]}),
            directory / "timings.csv",
        )
        write_table(metrics, directory / "metrics.csv")
    return RunResult(directory, metrics, "ok", timings)
