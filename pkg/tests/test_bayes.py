import math

import numpy as np
import pytest
from scipy.stats import norm

from bayes.calibration import MIN_HELD_OUT, calibration_report, empirical_coverage
from bayes.diagnostics import effective_sample_size, split_rhat
from bayes.hmc import (
    DualAveraging,
    acceptance_probability,
    hmc_sample,
    kinetic_energy,
    leapfrog,
    warmup_windows,
)
from bayes.likelihood import PosteriorTarget, log_posterior
from bayes.predictive import (
    NOMINAL_LEVELS,
    PredictiveSummary,
    predictive_summary,
    summarize_draws,
)
from bayes.schemas import BayesConfig
from errors import ConfigError, ContractError, SamplerHealthError
from helpers import interior_points, make_ensemble
from pde.sampling import sample_points
from solvers.datasets import LabeledSet


def _gaussian(precision):
    def log_density(x):
        return -0.5 * float(x @ precision @ x), -(precision @ x)

    return log_density


def _sampler_config(**overrides):
    base = {
        "chains": 4,
        "warmup": 500,
        "samples": 1000,
        "step_size": 0.1,
        "thin": 1,
        "init_jitter": 1.0,
    }
    return BayesConfig.parse(base, **overrides)


@pytest.fixture(scope="module")
def normal_ensemble():
    return hmc_sample(np.zeros(10), _gaussian(np.eye(10)), _sampler_config())


def test_hmc_recovers_standard_normal(normal_ensemble):
    draws = normal_ensemble.flat_params()
    assert draws.shape == (4000, 10)
    assert np.all(np.abs(draws.mean(axis=0)) < 0.05)
    sd = draws.std(axis=0)
    assert np.all((sd >= 0.9) & (sd <= 1.1))
    assert normal_ensemble.rhat < 1.05
    acceptance = normal_ensemble.acceptance
    assert np.all((acceptance > 0.4) & (acceptance < 0.95))
    assert normal_ensemble.sigma_hf is None


def test_chains_agree_within_standard_errors(normal_ensemble):
    draws = normal_ensemble.params
    n = draws.shape[1]
    means = draws.mean(axis=1)
    variances = draws.var(axis=1, ddof=1)
    ess = np.array(
        [[min(effective_sample_size(col), n) for col in chain.T] for chain in draws]
    )
    for a in range(normal_ensemble.n_chains):
        for b in range(a + 1, normal_ensemble.n_chains):
            se = np.sqrt(variances[a] / ess[a] + variances[b] / ess[b])
            assert np.all(np.abs(means[a] - means[b]) <= 3.0 * se), (a, b)


def test_hmc_recovers_correlation():
    cov = np.array([[1.0, 0.9], [0.9, 1.0]])
    ensemble = hmc_sample(np.zeros(2), _gaussian(np.linalg.inv(cov)), _sampler_config())
    draws = ensemble.flat_params()
    assert draws.shape == (4000, 2)
    assert 0.85 <= np.corrcoef(draws.T)[0, 1] <= 0.95


def test_acceptance_probability_never_overflows():
    assert acceptance_probability(-1e4) == 1.0
    assert acceptance_probability(0.0) == 1.0
    assert acceptance_probability(math.log(2.0)) == pytest.approx(0.5)
    assert acceptance_probability(math.inf) == 0.0
    assert acceptance_probability(math.nan) == 0.0


def test_hmc_survives_a_sharp_jump_in_log_density():
    def cliff(x):
        return -0.5 * float(x @ x) + (1e4 if x[0] > 0.05 else 0.0), -x

    config = BayesConfig.parse(
        {
            "chains": 2,
            "warmup": 100,
            "samples": 20,
            "thin": 1,
            "leapfrog_steps": 5,
            "step_size": 0.1,
            "init_jitter": 0.0,
            "max_divergence_fraction": 1.0,
        }
    )
    ensemble = hmc_sample(np.zeros(3), cliff, config)
    assert np.all(np.isfinite(ensemble.draws))
    assert np.all(np.isfinite(ensemble.log_posterior))


def test_warmup_leaves_a_final_step_size_window():
    assert warmup_windows(100) == (50, 75)
    assert warmup_windows(200) == (100, 150)
    assert warmup_windows(500) == (250, 400)
    for warmup in (100, 150, 200, 300, 1000):
        start, end = warmup_windows(warmup)
        assert start == warmup // 2 < end
        assert warmup - end >= min(50, warmup // 4)


def test_dual_averaging_restart_stays_at_the_found_step():
    adapter = DualAveraging(0.1)
    assert adapter.mu == pytest.approx(math.log(1.0))
    adapter.update(0.2)
    adapter.restart(0.02, shrink_bias=1.0)
    assert adapter.mu == pytest.approx(math.log(0.02))
    assert adapter.step_size == pytest.approx(0.02)
    assert adapter.count == 0


def test_hmc_adapts_to_a_stiff_target_without_divergences():
    """Scales from 1 down to 1e-3, the spread of a trained network posterior."""
    precision = np.diag(np.logspace(0.0, 6.0, 10))
    config = BayesConfig.parse(
        {
            "chains": 2,
            "warmup": 200,
            "samples": 200,
            "thin": 1,
            "leapfrog_steps": 8,
            "step_size": 1e-3,
        }
    )
    ensemble = hmc_sample(np.zeros(10), _gaussian(precision), config)
    assert ensemble.divergences.sum() == 0
    assert np.all(ensemble.acceptance > 0.4)


def test_leapfrog_energy_error_is_second_order():
    log_density = _gaussian(np.diag([1.0, 4.0]))
    inv_mass = np.ones(2)
    theta0, p0 = np.array([0.3, -0.8]), np.array([1.1, 0.2])
    start = -log_density(theta0)[0] + kinetic_energy(p0, inv_mass)

    errors = []
    for step, n_steps in ((0.1, 10), (0.01, 100)):
        theta, p, logp, _ = leapfrog(theta0, p0, log_density, step, n_steps, inv_mass)
        errors.append(abs(-logp + kinetic_energy(p, inv_mass) - start))
    assert 80.0 < errors[0] / errors[1] < 125.0


def test_leapfrog_is_reversible_and_conserves_energy():
    log_density = _gaussian(np.diag([1.0, 4.0]))
    inv_mass = np.ones(2)
    theta0, p0 = np.array([0.3, -0.8]), np.array([1.1, 0.2])
    theta1, p1, logp1, _ = leapfrog(theta0, p0, log_density, 0.01, 100, inv_mass)
    back, p_back, _, _ = leapfrog(theta1, -p1, log_density, 0.01, 100, inv_mass)
    np.testing.assert_allclose(back, theta0, atol=1e-10)
    np.testing.assert_allclose(-p_back, p0, atol=1e-10)

    start = -log_density(theta0)[0] + kinetic_energy(p0, inv_mass)
    end = -logp1 + kinetic_energy(p1, inv_mass)
    assert abs(end - start) < 1e-3


def test_zero_leapfrog_steps_is_config_error():
    with pytest.raises(ConfigError):
        BayesConfig.parse({"leapfrog_steps": 0})
    with pytest.raises(ConfigError):
        leapfrog(np.zeros(2), np.ones(2), _gaussian(np.eye(2)), 0.1, 0, np.ones(2))


def test_bayes_config_rules():
    with pytest.raises(ConfigError):
        BayesConfig.parse({"warmup": 50})
    assert BayesConfig.parse({"warmup": 0, "adapt": False}).warmup == 0
    with pytest.raises(ConfigError):
        BayesConfig.parse({"sigma_hf": -0.1})
    assert BayesConfig.parse({"samples": 11, "thin": 5}).n_stored == 3


def test_dual_averaging_moves_step_toward_target():
    growing = DualAveraging(0.1, target=0.75)
    for _ in range(50):
        growing.update(1.0)
    shrinking = DualAveraging(0.1, target=0.75)
    for _ in range(50):
        shrinking.update(0.0)
    assert growing.final_step_size > 0.1 > shrinking.final_step_size


def test_divergent_sampler_raises_health_error():
    config = BayesConfig.parse(
        {
            "chains": 2,
            "warmup": 0,
            "adapt": False,
            "samples": 20,
            "step_size": 1.0,
            "leapfrog_steps": 5,
        }
    )
    with np.errstate(all="ignore"):
        with pytest.raises(SamplerHealthError):
            hmc_sample(np.ones(3), _gaussian(1e8 * np.eye(3)), config)


def test_effective_sample_size():
    rng = np.random.default_rng(0)
    iid = rng.standard_normal(4000)
    assert 0.6 * 4000 < effective_sample_size(iid) < 1.5 * 4000

    phi, n = 0.9, 20000
    series = np.zeros(n)
    noise = rng.standard_normal(n)
    for i in range(1, n):
        series[i] = phi * series[i - 1] + noise[i]
    expected = n * (1 - phi) / (1 + phi)
    assert 0.6 * expected < effective_sample_size(series) < 1.5 * expected

    assert effective_sample_size(np.ones(50)) == 50.0


def test_split_rhat():
    rng = np.random.default_rng(1)
    mixed = rng.standard_normal((4, 1000))
    assert split_rhat(mixed) < 1.02
    stuck = mixed + np.arange(4)[:, None] * 3.0
    assert split_rhat(stuck) > 1.5
    assert math.isnan(split_rhat(mixed[:, :3]))


def test_summary_of_identical_noise_free_draws_is_degenerate():
    predictions = np.tile(np.arange(-3.0, 4.0)[None, :, None], (60, 1, 1))
    summary = summarize_draws(predictions, 0.0, np.zeros((7, 2)))
    np.testing.assert_array_equal(summary.epistemic, 0.0)
    np.testing.assert_array_equal(summary.aleatoric, 0.0)
    np.testing.assert_array_equal(summary.lower, summary.mean)
    np.testing.assert_array_equal(summary.upper, summary.mean)
    assert summary.reliable


def test_summary_variance_decomposition():
    draws = np.linspace(-1.0, 1.0, 40)[:, None, None] * np.ones((1, 5, 1))
    summary = summarize_draws(draws, 0.5, np.zeros((5, 1)), seed=3)
    np.testing.assert_allclose(summary.epistemic, np.var(np.linspace(-1.0, 1.0, 40)))
    np.testing.assert_allclose(summary.aleatoric, 0.25)
    np.testing.assert_allclose(summary.total, summary.aleatoric + summary.epistemic)
    assert np.all(summary.lower <= summary.mean)
    assert np.all(summary.mean <= summary.upper)
    assert not summary.reliable


def test_summary_interval_width_follows_noise():
    predictions = np.zeros((100, 50, 1))
    summary = summarize_draws(predictions, 0.5, np.zeros((50, 1)), seed=2)
    width = summary.upper - summary.lower
    np.testing.assert_allclose(width, 2 * 1.959964 * 0.5, rtol=0.1)


def test_summary_argument_errors():
    with pytest.raises(ContractError):
        summarize_draws(np.zeros((0, 3, 1)), 0.0, np.zeros((3, 1)))
    with pytest.raises(ContractError):
        summarize_draws(np.zeros((4, 3, 1)), -1.0, np.zeros((3, 1)))


def test_predictive_summary_from_ensemble(burgers_model, burgers):
    rng = np.random.default_rng(4)
    base = burgers_model.params
    params = base + 1e-3 * rng.standard_normal((2, 30, base.size))
    points = interior_points(burgers, 6, 0.01)

    ensemble = make_ensemble(params, sigma_hf=np.full((2, 30, 1), 0.02))
    summary = predictive_summary(ensemble, burgers_model, points, problem=burgers)
    assert summary.n_draws == 60
    np.testing.assert_allclose(summary.aleatoric, 0.02**2)
    assert summary.outputs == ("u",)
    frame = summary.to_frame(burgers.columns, truth=burgers.oracle(points))
    assert {"mean", "epistemic", "lower", "upper", "truth"} <= set(frame.columns)

    slope = predictive_summary(
        ensemble, burgers_model, points, quantity="u_x", problem=burgers
    )
    assert slope.outputs == ("u_x",)
    np.testing.assert_array_equal(slope.aleatoric, 0.0)
    with pytest.raises(ContractError):
        predictive_summary(ensemble, burgers_model, points, quantity="u_x")


def _summary(mean, lower, upper, bounds=None, total=None):
    zeros = np.zeros_like(mean)
    return PredictiveSummary(
        points=np.zeros((len(mean), 1)),
        mean=mean,
        total=zeros if total is None else total,
        aleatoric=zeros,
        epistemic=zeros,
        lower=lower,
        upper=upper,
        n_draws=100,
        level_bounds=bounds or {},
    )


def test_infinite_intervals_cover_everything():
    mean = np.zeros((MIN_HELD_OUT, 1))
    wide = (np.full_like(mean, -np.inf), np.full_like(mean, np.inf))
    bounds = {level: wide for level in NOMINAL_LEVELS}
    summary = _summary(mean, *wide, bounds=bounds)
    truth = np.random.default_rng(5).normal(size=mean.shape)
    coverage, ece = calibration_report(summary, truth)
    assert coverage == 100.0
    assert ece == pytest.approx(np.mean([1 - level for level in NOMINAL_LEVELS]))


def test_gaussian_intervals_are_calibrated():
    rng = np.random.default_rng(6)
    n, sigma = 20000, 0.3
    mean = rng.normal(size=(n, 1))
    truth = mean + sigma * rng.standard_normal((n, 1))
    half = norm.ppf(0.975) * sigma
    summary = _summary(mean, mean - half, mean + half, total=np.full((n, 1), sigma**2))
    coverage, ece = calibration_report(summary, truth)
    assert coverage == pytest.approx(95.0, abs=1.0)
    assert ece < 0.02
    assert empirical_coverage(summary, truth, 0.55) == pytest.approx(0.55, abs=0.02)


def test_calibration_needs_enough_points():
    mean = np.zeros((MIN_HELD_OUT - 1, 1))
    summary = _summary(mean, mean - 1, mean + 1)
    with pytest.raises(ContractError):
        calibration_report(summary, mean)
    with pytest.raises(ContractError):
        wide = np.ones((120, 1))
        calibration_report(_summary(0 * wide, -wide, wide), mean)


def _hf_set(problem, n, noise_sd=0.0):
    points = interior_points(problem, n, 1.0, seed=8)
    return LabeledSet(points, problem.oracle(points), "HF", noise_sd)


def test_prior_only_log_density(heat_model):
    config = BayesConfig.parse({"prior_scale": 2.0, "sigma_hf": 0.1})
    theta = np.random.default_rng(7).normal(size=heat_model.n_params)
    logp, grad = PosteriorTarget(heat_model, config).evaluate(theta)
    assert logp == pytest.approx(norm.logpdf(theta, scale=2.0).sum())
    np.testing.assert_allclose(grad, -theta / 4.0)


def test_log_posterior_without_data_is_the_prior(heat_model):
    theta = np.random.default_rng(9).normal(size=heat_model.n_params)
    logp, grad = log_posterior(theta, None, None, None, BayesConfig(), model=heat_model)
    assert logp == pytest.approx(norm.logpdf(theta).sum())
    np.testing.assert_allclose(grad, -theta)

    learned = BayesConfig(sigma_hf="learn", sigma_r="learn")
    target = PosteriorTarget(heat_model, learned)
    assert target.learned == ()
    assert target.dim == heat_model.n_params


def test_log_posterior_gradient_matches_finite_differences(heat_model, heat):
    collocation = sample_points(heat, (10, 8, 0, 1), seed=1, param_range=(1.0, 1.0))
    config = BayesConfig.parse({"sigma_hf": "learn", "sigma_r": 1.0, "subsample": 0})
    hf = _hf_set(heat, 8)
    target = PosteriorTarget(heat_model, config, heat, hf, None, collocation)
    assert target.learned == ("hf",)
    state = target.initial_state(heat_model.params)
    assert state.size == heat_model.n_params + 1

    logp, grad = target(state)
    h = 1e-6
    rng = np.random.default_rng(2)
    picks = list(rng.choice(heat_model.n_params, 10, replace=False))
    for i in picks + [state.size - 1]:
        step = np.zeros_like(state)
        step[i] = h
        fd = (target(state + step)[0] - target(state - step)[0]) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-5)

    fixed = config.model_copy(update={"sigma_hf": 0.05})
    value, _ = log_posterior(
        heat_model.params, _hf_set(heat, 8), collocation, heat, fixed, model=heat_model
    )
    assert np.isfinite(value)


def test_noise_scale_resolution(heat_model, heat):
    noisy = _hf_set(heat, 5, noise_sd=0.02)
    known = PosteriorTarget(heat_model, BayesConfig(), hf=noisy)
    assert known.learned == ()
    assert known.fixed["hf"] == 0.02
    assert known.fixed["b"] == known.fixed["r"] == 0.01
    unknown = PosteriorTarget(heat_model, BayesConfig(), hf=_hf_set(heat, 5))
    assert unknown.learns_sigma_hf

    collocation = sample_points(heat, (10, 0, 0, 1), seed=1)
    with pytest.raises(ConfigError):
        PosteriorTarget(
            heat_model, BayesConfig(subsample=50), heat, collocation=collocation
        )
    with pytest.raises(ContractError):
        PosteriorTarget(heat_model, BayesConfig(subsample=5), collocation=collocation)


def test_sampling_a_network_posterior(heat_model, heat):
    config = BayesConfig.parse(
        {
            "chains": 2,
            "warmup": 100,
            "samples": 20,
            "thin": 1,
            "leapfrog_steps": 4,
            "sigma_hf": "learn",
        }
    )
    target = PosteriorTarget(heat_model, config, heat, _hf_set(heat, 10))
    ensemble = hmc_sample(target.initial_state(heat_model.params), target, config)
    assert ensemble.params.shape == (2, 20, heat_model.n_params)
    assert ensemble.sigma_hf_index == heat_model.n_params
    assert np.all(ensemble.flat_sigma_hf() > 0)
    assert ensemble.n_draws == 40
