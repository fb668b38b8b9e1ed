import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lognorm_control.presets import example_system

# deterministic property testing: same examples on every run
settings.register_profile(
    "det", derandomize=True, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("det")


@pytest.fixture(scope="session")
def example():
    """The built-in demonstration system with its synthesized controller,
    shared read-only across the whole run (synthesis is not free)."""
    return example_system()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
