import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_matrix_with_spectrum(rng, m, n, sigmas):
    """Matrix with prescribed singular values and Haar-random factors."""
    q1, _ = np.linalg.qr(rng.standard_normal((m, m)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    sig = np.zeros((m, n))
    r = min(m, n, len(sigmas))
    sig[:r, :r] = np.diag(sigmas[:r])
    return q1 @ sig @ q2.T
