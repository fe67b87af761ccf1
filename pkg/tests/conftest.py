import os

import pytest
from hypothesis import HealthCheck, settings

from swapcal.instances import random_instance
from swapcal.separations import build_glm_instance, build_parity_instance

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def parity():
    return build_parity_instance()


@pytest.fixture(scope="session")
def glm():
    return build_glm_instance()


@pytest.fixture(scope="session")
def random_instances():
    return [random_instance(seed) for seed in range(100)]
