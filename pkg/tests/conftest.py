import pytest
from hypothesis import settings

from excomp import builtin, tessellate

settings.register_profile("ci", derandomize=True, deadline=None, max_examples=60)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def plane_128():
    return tessellate(builtin("plane", cover_radius=3.2), 128, 128)


@pytest.fixture(scope="session")
def plane_256():
    return tessellate(builtin("plane", cover_radius=3.2), 256, 256)


@pytest.fixture(scope="session")
def plane_512():
    return tessellate(builtin("plane", cover_radius=3.2), 512, 512)


@pytest.fixture(scope="session")
def catenoid_96():
    return tessellate(builtin("catenoid", a=1.0, cover_radius=21.0), 96, 96)


@pytest.fixture(scope="session")
def catenoid_192():
    return tessellate(builtin("catenoid", a=1.0, cover_radius=21.0), 192, 192)


@pytest.fixture(scope="session")
def catenoid_384():
    return tessellate(builtin("catenoid", a=1.0, cover_radius=21.0), 384, 384)


@pytest.fixture(scope="session")
def enneper_192():
    return tessellate(builtin("enneper", cover_radius=12.0), 192, 192)


@pytest.fixture(scope="session")
def enneper_384():
    return tessellate(builtin("enneper", cover_radius=12.0), 384, 384)
