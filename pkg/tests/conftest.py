import numpy as np
import pytest

from jdqml.filters import Threshold
from jdqml.likelihood import QllContext
from jdqml.model import levy_ou_model
from jdqml.simulate import Path

H_TINY = 0.01
X_TINY = [1.0, 0.9, 0.95, 3.95]  # increments -0.1, 0.05, 3.0
CUT_TINY = Threshold(0.3)  # 0.01**0.3 = 0.2512


def make_path(values, h):
    values = np.asarray(values, dtype=float)
    return Path(times=np.arange(values.shape[0]) * h, values=values, h=h)


@pytest.fixture
def levy():
    return levy_ou_model()


@pytest.fixture
def theta0(levy):
    return levy.params(alpha=2.0, beta=2.5, mu=0.0, sigma2=20.25, **{"lambda": 6.0})


@pytest.fixture
def tiny_path():
    return make_path(X_TINY, H_TINY)


@pytest.fixture
def tiny_ctx(levy, tiny_path):
    return QllContext(levy, tiny_path)
