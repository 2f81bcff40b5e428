"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from mesim import RadarConfig


@pytest.fixture
def cfg_small():
    """Cheap frame: 4 channels, 128 chirps, 256 fast-time samples.

    Usable (real-sampling) range window is 128 bins of 0.15 m, so targets
    up to about 19 m stay unaliased.
    """
    return RadarConfig(start_freq=77e9, bandwidth=1e9, chirp_duration=16e-6,
                       sample_rate=16e6, pri=16e-6, num_chirps=128, num_elev=4)


@pytest.fixture
def cfg_paper():
    """The point-target simulation setup: 1 GHz sweep over 16 us at 32 Msps."""
    return RadarConfig(start_freq=77e9, bandwidth=1e9, chirp_duration=16e-6,
                       sample_rate=32e6, pri=16e-6, num_chirps=512, num_elev=8)
