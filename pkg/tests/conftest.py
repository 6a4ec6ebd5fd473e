import pytest

from secondorder.geometry import DoubleSlitMask, OpticalSetup, SourceProfile

MM = 1e-3
UM = 1e-6


@pytest.fixture
def setup():
    return OpticalSetup()


@pytest.fixture
def hard_edge():
    return OpticalSetup(source=SourceProfile("uniform-hard-edge", 0.55 * MM))


@pytest.fixture
def point_masks():
    """Centered masks with the experimental separations and point slits."""
    return DoubleSlitMask(0.0, 0.69 * MM, 0.0, "C"), DoubleSlitMask(0.0, 0.57 * MM, 0.0, "T")


@pytest.fixture
def slit_masks():
    return DoubleSlitMask(0.0, 0.69 * MM, 55 * UM, "C"), DoubleSlitMask(0.0, 0.57 * MM, 55 * UM, "T")
