import math

import numpy as np
import pytest

import killing_geodesics as kg

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def flat_torus():
    """Timelike unit field on the flat Lorentzian 2-torus."""
    return kg.make_flat_lorentzian_torus((0.0, 1.0))


@pytest.fixture(scope="session")
def flat_torus_null():
    return kg.make_flat_lorentzian_torus((1.0, 1.0))


@pytest.fixture(scope="session")
def flat_torus_irrational():
    return kg.make_flat_lorentzian_torus((1.0, SQRT2))


@pytest.fixture(scope="session")
def klein():
    return kg.make_klein_bottle()


@pytest.fixture(scope="session")
def s3():
    return kg.make_stationary_sphere(SQRT2)


@pytest.fixture(scope="session")
def mapping_torus():
    return kg.make_mapping_torus(1.0)


@pytest.fixture(scope="session")
def t4():
    return kg.make_commuting_family_example(2)


@pytest.fixture(scope="session")
def lorentzian_entries(flat_torus, klein, s3, mapping_torus):
    return [flat_torus, klein, s3, mapping_torus]


@pytest.fixture(scope="session")
def all_entries(lorentzian_entries, t4):
    return lorentzian_entries + [t4]


def random_tangent(M, p, rng):
    return M.tangent_project(p, rng.normal(size=M.ambient_dim))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
