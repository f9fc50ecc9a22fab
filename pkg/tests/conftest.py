import numpy as np
import pytest

from pmds_lrs import FieldTower, MrParams, build_code, example1_code, field_create


@pytest.fixture
def gf16():
    # GF(4) ⊂ GF(16) over x^4 + x + 1
    return field_create(2, 2, 2)


@pytest.fixture
def gf64():
    return field_create(2, 3, 2)


@pytest.fixture
def gf81():
    return field_create(3, 2, 2)


@pytest.fixture
def gf125():
    return field_create(5, 1, 3)


@pytest.fixture(params=[(2, 2, 2), (2, 3, 2), (3, 2, 2), (5, 1, 3), (3, 1, 1), (2, 1, 4)])
def tower(request) -> FieldTower:
    return field_create(*request.param)


@pytest.fixture
def example1():
    return example1_code()


@pytest.fixture
def code(request):
    try:
        args = request.param
    except AttributeError:
        args = (2, 2, 2, 2, 2, 3)
    return build_code(MrParams(*args))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def anyio_backend():
    return "asyncio"
