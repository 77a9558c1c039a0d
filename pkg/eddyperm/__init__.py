""".. include:: ../README.md

# Install
```bash
pip install .
```

# Library use
Simulate a spectrum, extract its features and compensate them against a reference:
```python3
import eddyperm
from eddyperm.forward_model import CoilGeometry, PlateProperties, frequency_grid

grid = frequency_grid(1, 1e6, 40)
plate = PlateProperties(sigma=6.624e6, mu_r=125.2)
reference = eddyperm.simulate_spectrum(CoilGeometry(l0=0.8e-3), plate, grid)
sample = eddyperm.simulate_spectrum(CoilGeometry(l0=3.8e-3), plate, grid)

cal = eddyperm.build_calibration(reference, CoilGeometry(l0=0.8e-3), plate.sigma)
result = eddyperm.run_compensation(eddyperm.extract_features(sample), cal)
print(result.mu_r_est, result.liftoff_est)
```

# Modules
- `eddyperm.forward_model`: the analytical coil-above-plate model and α₀
- `eddyperm.features`: zero crossing, plateau amplitude, impedance conversion
- `eddyperm.compensation`: lift-off compensation, calibration and fitting
- `eddyperm.io`: CSV, TOML and JSON formats
- `eddyperm.cli`: the `eddyperm` command
"""  # noqa: D415

__version__ = "0.1.0"

from . import util  # noqa: E402,F401
from . import errors  # noqa: E402,F401
from . import forward_model  # noqa: E402
from . import features  # noqa: E402
from . import compensation  # noqa: E402
from . import io  # noqa: E402,F401


simulate_spectrum = forward_model.simulate_spectrum
extract_features = features.extract_features
build_calibration = compensation.build_calibration
run_compensation = compensation.run_compensation
