"""Shared fixtures and dataset factories for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from condcov import Dataset
from condcov.simulate import SimConfig, TruthSurfaces, gen_covariates, gen_outputs

from kw51synth import write_kw51_like_csv


def make_dataset(n, p, q, seed, noise=0.3):
    """Random smooth-response dataset: X = trig(Z) + Gaussian noise."""
    rng = np.random.default_rng(seed)
    Z = rng.uniform(-2.0, 2.0, size=(n, q))
    X = np.empty((n, p))
    for j in range(p):
        X[:, j] = (
            np.sin(Z[:, j % q] + 0.5 * j)
            + 0.4 * np.cos(Z.sum(axis=1))
            + noise * rng.standard_normal(n)
        )
    return Dataset(Z, X)


def make_sim_dataset(n_hours, q, seed):
    """Benchmark-style dataset: simulated covariates and outputs."""
    config = SimConfig(n_hours=n_hours, seed=seed)
    rng = np.random.default_rng(seed)
    surfaces = TruthSurfaces.from_params(config.truth)
    Z, _, _ = gen_covariates(config, rng)
    X, Sigma = gen_outputs(Z[:, :2], surfaces, config.noise, rng)
    data = Dataset(Z[:, :q], X, timestamps=np.arange(n_hours, dtype=np.float64))
    return data, Sigma


@pytest.fixture(scope="session")
def sim_q2():
    """Moderate q=2 simulated dataset shared by bandwidth-selection tests."""
    data, sigma = make_sim_dataset(1440, 2, seed=42)
    return data, sigma


@pytest.fixture(scope="session")
def kw51_csv(tmp_path_factory):
    """Synthetic KW51-schema monitoring CSV with injected gaps."""
    path = tmp_path_factory.mktemp("kw51") / "kw51_synthetic.csv"
    write_kw51_like_csv(path)
    return path
