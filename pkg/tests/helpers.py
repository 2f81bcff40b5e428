"""Small numeric helpers shared by the tests."""

import numpy as np

from mesim import Scene


def target_position(range_m, azimuth_deg, elevation_deg):
    """Cartesian position of a point at the given spherical coordinates."""
    th = np.deg2rad(azimuth_deg)
    ph = np.deg2rad(elevation_deg)
    return np.array([range_m * np.cos(th) * np.cos(ph),
                     range_m * np.sin(th) * np.cos(ph),
                     range_m * np.sin(ph)])


def point_scene(range_m, azimuth_deg, elevation_deg, amplitude=1.0):
    """Scene holding a single unit scatterer at the given angles."""
    pos = target_position(range_m, azimuth_deg, elevation_deg)
    return Scene(positions=pos[None, :],
                 amplitudes=np.array([amplitude], dtype=complex))


def wrap_phase(x):
    """Wrap angles into (-pi, pi]."""
    return np.angle(np.exp(1j * np.asarray(x)))


def peak_range_bin(spectrum):
    """Index of the strongest usable range bin, summed over channels/chirps."""
    power = np.sum(np.abs(spectrum.bins) ** 2, axis=(0, 1))
    return int(np.argmax(power[:spectrum.usable_bins]))
