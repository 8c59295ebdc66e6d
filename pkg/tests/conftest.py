"""Shared fixtures: a default environment, datasets, and one recorded run."""

import warnings

import numpy as np
import pytest

import fogas

# Auto-tuned short runs deliberately sit below the theoretical minimum
# iteration count; the warning is expected and checked once in test_solver.
warnings.filterwarnings("ignore", message="auto-tuned run with T=")


@pytest.fixture(scope="session")
def default_mdp():
    return fogas.generate_linear_mdp(
        num_states=5, num_actions=3, dim=4, gamma=0.9, seed=0
    )


@pytest.fixture(scope="session")
def default_dataset(default_mdp):
    behavior = fogas.uniform_policy(5, 3)
    return fogas.collect_dataset(
        default_mdp, behavior, n=512, sampling_mode="uniform", seed=7
    )


@pytest.fixture(scope="session")
def recorded_run(default_mdp, default_dataset):
    """A short auto-tuned run with the full trajectory kept."""
    config = fogas.FogasConfig(T=50, seed=3, auto_tune=True, record_trajectory=True)
    return fogas.run_fogas(default_mdp, default_dataset, config)


def random_mdp(rng_seed, num_states=5, num_actions=3, dim=4, gamma=0.9):
    return fogas.generate_linear_mdp(num_states, num_actions, dim, gamma, rng_seed)


def random_policy(num_states, num_actions, rng):
    probs = rng.dirichlet(np.ones(num_actions), size=num_states)
    return fogas.TabularPolicy(probs)
