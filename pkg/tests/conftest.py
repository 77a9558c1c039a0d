from pathlib import Path
from loguru import logger
import pytest
from eddyperm.forward_model import (
    CoilGeometry,
    PlateProperties,
    frequency_grid,
    simulate_spectrum,
)


FIXTURES_DIR = Path(__file__).parent / "fixtures"
LADDER_MM = (0.8, 2.3, 2.8, 3.3, 3.8, 4.3, 4.8, 5.3)


@pytest.fixture(scope="session")
def geometry():
    return CoilGeometry()


@pytest.fixture(scope="session")
def plate():
    return PlateProperties()


@pytest.fixture(scope="session")
def grid():
    return frequency_grid(1.0, 1e6, 40)


@pytest.fixture(scope="session")
def ladder_spectra(geometry, plate, grid):
    """Simulated spectra of the default coil and plate, by lift-off in mm."""
    return {
        mm: simulate_spectrum(geometry.with_liftoff(mm * 1e-3), plate, grid)
        for mm in LADDER_MM
    }


@pytest.fixture(scope="session")
def reference_spectrum(ladder_spectra):
    return ladder_spectra[0.8]


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def log_messages():
    """Messages logged at WARNING or above during the test."""
    messages = []
    handler = logger.add(lambda m: messages.append(str(m)), level="WARNING")
    yield messages
    logger.remove(handler)
