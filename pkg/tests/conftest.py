import numpy as np
import pytest

from consflow.harness import build_paper_example_5agent, run_experiment


@pytest.fixture(scope="session")
def builtin5():
    """The documented 5-agent acceptance instance (seed 2)."""
    problem, config = build_paper_example_5agent(2)
    return problem, config


@pytest.fixture(scope="session")
def builtin5_record(builtin5):
    """Deep integral-flow run of the 5-agent instance, shared across tests."""
    _, config = builtin5
    return run_experiment(config, quiet=True)


@pytest.fixture(scope="session")
def builtin5_baseline(builtin5):
    """Diminishing-gain baseline on the same instance, from t0 = 1."""
    _, config = builtin5
    cfg = dict(config)
    cfg["algorithm"] = {"flow": "diminishing", "gain": {"kind": "inverse_t"},
                        "t0": 1.0}
    cfg["stop"] = {"metric": "W", "threshold": None, "t_max": 60.0}
    cfg["analysis"] = {"attach": False}
    return run_experiment(cfg, quiet=True)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
