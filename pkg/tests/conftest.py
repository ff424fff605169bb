import pytest

import forcedmaps as fm

# closed-form critical parameter of arctan(100 x) - 2 beta - 1
BETA_C_M1 = 0.1855650809613374
# reference critical parameter of the golden-mean forced family
BETA_C_QP = 0.2753743

M1 = [(0.25, 0.25), (0.75, 0.75)]
M2 = [(0.25, 0.75), (0.75, 0.25)]


@pytest.fixture(scope="session")
def rotation():
    return fm.BaseSystem.rotation()


@pytest.fixture(scope="session")
def torus():
    return fm.BaseSystem.torus()


@pytest.fixture(scope="session")
def identity():
    return fm.BaseSystem.identity()


@pytest.fixture(scope="session")
def fam1():
    return fm.arctan_1d(100.0, 0.5)


@pytest.fixture(scope="session")
def fam2():
    return fm.arctan_2d(100.0, 0.5)


@pytest.fixture(scope="session")
def m1_base():
    return fm.BaseSystem.periodic_orbit(M1)
