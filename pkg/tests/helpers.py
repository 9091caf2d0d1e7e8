"""Small shared builders for the test modules."""

import numpy as np

from bayes.hmc import PosteriorEnsemble
from network.composite import default_specs, init_params

TINY_WIDTHS = {"lf": 8, "lin": 4, "nl": 6, "gate": 4}
TINY_LAYERS = {"lf": 1, "lin": 1, "nl": 1, "gate": 1}


def tiny_model(problem, seed=0, gate_mode="adaptive", widths=None, layers=None):
    specs = default_specs(
        problem.input_dim,
        problem.output_dim,
        widths={**TINY_WIDTHS, **(widths or {})},
        layers={**TINY_LAYERS, **(layers or {})},
    )
    return init_params(
        specs,
        seed,
        input_lo=problem.input_lo,
        input_hi=problem.input_hi,
        log_axes=problem.log_axes,
        gate_mode=gate_mode,
    )


def interior_points(problem, n, mu, seed=0):
    """Points kept 5% away from every face of the problem box."""
    rng = np.random.default_rng(seed)
    lower, upper = np.asarray(problem.lower), np.asarray(problem.upper)
    span = upper - lower
    coords = lower + 0.05 * span + 0.9 * span * rng.random((n, len(lower)))
    return np.column_stack([coords, np.full(n, float(mu))])


def make_ensemble(params, sigma_hf=None):
    """Wrap ``(chains, draws, n_params)`` parameters as a posterior ensemble."""
    if sigma_hf is not None:
        draws = np.concatenate([params, np.log(sigma_hf)], axis=-1)
    else:
        draws = params
    chains = draws.shape[0]
    return PosteriorEnsemble(
        draws=draws,
        log_posterior=np.zeros(draws.shape[:2]),
        acceptance=np.full(chains, 0.8),
        step_size=np.full(chains, 0.01),
        inv_mass=np.ones((chains, draws.shape[-1])),
        divergences=np.zeros(chains, dtype=int),
        ess=np.full(chains, 100.0),
        rhat=1.0,
        n_params=params.shape[-1],
        sigma_hf_index=None if sigma_hf is None else params.shape[-1],
    )
