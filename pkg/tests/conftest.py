import pytest
from hypothesis import HealthCheck, settings

from sembridge.synthbench import SyntheticLanguageSpec, generate_world

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_world():
    """A cheap world for plumbing tests; generation stays well under a second."""
    spec = SyntheticLanguageSpec(
        n_source=300, n_target=80, docs=120, queries=40, seed=7
    )
    return generate_world(spec)


@pytest.fixture(scope="session")
def default_world():
    """The benchmark's default world (seed 42, sigma 0.05)."""
    return generate_world(SyntheticLanguageSpec())
