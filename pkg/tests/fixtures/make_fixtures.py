"""Write the measured-format fixtures.

Writes an air reference sweep and a sample sweep of the default coil at 2.3 mm above the
default plate, on the analyzer grid (210 Hz to 1 MHz, 40 points per decade), with seeded
relative noise on every impedance.

Run from the project root: `python tests/fixtures/make_fixtures.py`. The shipped files came
from an independent quadrature of the same integral with a different noise stream, so
rewritten files agree with them to within the noise rather than digit for digit.
"""

from pathlib import Path
import math
import numpy as np
from eddyperm import io, util
from eddyperm.features import ImpedanceSweep, inductance_to_impedance
from eddyperm.forward_model import CoilGeometry, PlateProperties, simulate_spectrum


FIXTURES_DIR = Path(__file__).parent
SAMPLE_LIFTOFF = 2.3e-3
AIR_INDUCTANCE = 5e-5
RELATIVE_NOISE = 1e-5
SEED = 7


def _grid() -> np.ndarray:
    count = int(math.floor(math.log10(1e6 / 210) * 40 + 1e-9)) + 1
    return 210 * 10.0 ** (np.arange(count) / 40)


def main():
    """Write `air_reference.csv` and `measured_sample.csv` next to this file."""
    rng = np.random.default_rng(SEED)
    grid = _grid()
    air_z = 2j * math.pi * grid * AIR_INDUCTANCE

    def noise():
        scale = RELATIVE_NOISE * np.abs(air_z)
        return scale * rng.standard_normal(len(grid)) + 1j * scale * rng.standard_normal(len(grid))

    air = ImpedanceSweep(grid, air_z + noise(), is_air_reference=True)
    geom = CoilGeometry(l0=SAMPLE_LIFTOFF)
    spectrum = simulate_spectrum(geom, PlateProperties(), grid)
    sample = inductance_to_impedance(spectrum, ImpedanceSweep(grid, air_z))
    sample = ImpedanceSweep(grid, sample.impedances + noise())
    util.file_dump(FIXTURES_DIR / "air_reference.csv", io.write_sweep_csv(air))
    util.file_dump(FIXTURES_DIR / "measured_sample.csv", io.write_sweep_csv(sample))


if __name__ == "__main__":
    main()
