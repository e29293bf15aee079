# tests/conftest.py

import numpy as np
import pytest

from pncsim.operations.ldpc import LdpcCode, build_cyclic_eg_code
from pncsim.operations.macchannel import PulseShape, build_channel


@pytest.fixture
def rng():
    """Fresh seeded generator per test."""
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def eg15():
    """The (15,7) cyclic Euclidean-geometry code."""
    h, generator = build_cyclic_eg_code(2)
    return LdpcCode(h=h, generator=generator)


@pytest.fixture(scope="session")
def eg63():
    """The (63,37) cyclic Euclidean-geometry code."""
    h, generator = build_cyclic_eg_code(3)
    return LdpcCode(h=h, generator=generator)


@pytest.fixture(scope="session")
def rect_channel():
    """Exact rectangular factor at eps = 0.5, reduced-trellis capable."""
    pulse = PulseShape.rectangular()
    return build_channel(pulse, pulse, 0.5, delta_theta=np.pi / 4, sigma2=1e-6, loading=0.0,
                         exact_rectangular=True)
