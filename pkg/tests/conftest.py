import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=60, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_real_roots_poly(rng, n, radius=1.0):
    """Roots of a random real polynomial: real roots plus conjugate pairs,
    all inside the disk of the given radius."""
    roots = []
    while len(roots) < n:
        if n - len(roots) >= 2 and rng.random() < 0.5:
            z = radius * np.sqrt(rng.random()) * np.exp(1j * rng.uniform(0, np.pi))
            roots += [z, np.conj(z)]
        else:
            roots.append(rng.uniform(-radius, radius))
    return np.array(roots, dtype=complex)
