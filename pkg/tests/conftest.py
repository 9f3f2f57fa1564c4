from __future__ import annotations

import numpy as np
import pytest

from monet.dataset import simulate_country_dataset


@pytest.fixture(scope="session")
def us_synthetic():
    return simulate_country_dataset("US", "1959Q1", "2022Q4", seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


FAST_GRIDS = {
    "QRF": [{"mtry": 1, "min_node_size": 5}, {"mtry": 2, "min_node_size": 5}],
    "BRNN": [{"neurons": 2}],
    "SVMRadial": [{"C": 4.0, "width": 1.0}],
    "CForest": [{"mtry": 2}],
}


def fast_config(country="US", **over):
    from monet.config import CountryConfig, MlSettings, SamplerSettings
    base = dict(country=country, synthetic=True, seed=2024,
                sampler=SamplerSettings(chains=2, warmup=150, draws=200),
                reset_replicates=200,
                ml=MlSettings(folds=3, repeats=2, n_trees=40, grids=FAST_GRIDS))
    base.update(over)
    return CountryConfig(**base)


@pytest.fixture(scope="session")
def us_report():
    from monet.pipeline import run_pipeline
    return run_pipeline(fast_config("US"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
