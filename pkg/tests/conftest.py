import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from loransim.geodata import ConductivityGrid, GeoPoint


@pytest.fixture
def sea_grid():
    """Uniform seawater conductivity grid covering a generous box."""
    return ConductivityGrid(
        origin=GeoPoint(-10.0, -10.0),
        cell_size_deg=1.0,
        n_cols=20,
        n_rows=20,
        sigma=np.full((20, 20), 5.0),
        eps=np.full((20, 20), 80.0),
    )


@pytest.fixture
def data_dir():
    return Path(__file__).resolve().parents[1] / "src" / "loransim" / "data"
