import pytest
from hypothesis import settings

from gaest.cohort import SynthConfig, synthesize_cohort

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_cohort():
    return synthesize_cohort(SynthConfig(n_patients=40, rng_seed=11))
