import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pd(rng, p, scale=1.0):
    a = rng.normal(size=(p, p))
    return scale * (a @ a.T + p * np.eye(p) * 0.5)


def random_cmsn(rng, p, alpha=None, beta=None, lam_scale=1.5):
    from skewmix import CmsnParams

    mu = rng.normal(size=p)
    sigma = random_pd(rng, p)
    lam = rng.normal(size=p) * lam_scale
    alpha = rng.uniform(0.6, 0.95) if alpha is None else alpha
    beta = rng.uniform(3.0, 15.0) if beta is None else beta
    return CmsnParams.make(mu, sigma, lam, alpha, beta)


@pytest.fixture
def make_pd():
    return random_pd


@pytest.fixture
def make_cmsn():
    return random_cmsn
