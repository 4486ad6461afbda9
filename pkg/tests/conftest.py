import numpy as np
import pytest

from fracwave import FracParams, WaveParams, build_kernel


@pytest.fixture(scope="session")
def p_half():
    return FracParams(0.5)


@pytest.fixture(scope="session")
def w_std(p_half):
    """tau = 1, alpha = 0.5, h' = 1: the standard desk-scale parameter point."""
    return WaveParams.from_hprime(1.0, 1.0, p_half)


@pytest.fixture(scope="session")
def kernel_half(p_half):
    return build_kernel(p_half)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(905)
