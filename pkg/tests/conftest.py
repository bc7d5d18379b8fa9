import numpy as np
import pytest
from hypothesis import settings

from cornertrack.render import RenderSettings
from cornertrack.scene import Pose, make_planar_object, orthographic_wall_scene

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fig2_scene():
    """2 m x 2 m orthographic wall, laser spot at its center, odd grid so a pixel sits on the center."""
    return orthographic_wall_scene(101, 101, 2.0, 2.0)


@pytest.fixture(scope="session")
def desk_scene():
    return orthographic_wall_scene(80, 64, 2.0, 1.6)


@pytest.fixture(scope="session")
def small_scene():
    return orthographic_wall_scene(24, 20, 2.0, 1.6)


@pytest.fixture(scope="session")
def square():
    return make_planar_object(0.1, 0.1, 10, 10, name="square")


@pytest.fixture(scope="session")
def settings_default():
    return RenderSettings()


@pytest.fixture
def at_50cm():
    return Pose((0.0, 0.5, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
