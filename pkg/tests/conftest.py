import numpy as np
import pytest

from bullbear import kernels
from bullbear.regime import reference_parameters


@pytest.fixture
def ref_params():
    return reference_parameters()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return kernels.available_backends()[request.param]
