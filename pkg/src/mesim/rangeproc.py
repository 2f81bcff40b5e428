"""Fast-time spectra, range-bin detection and per-bin slice extraction."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .config import RadarConfig
from .constants import SPEED_OF_LIGHT
from .errors import MesimError
from .simulate import RawDataCube

WINDOWS = ("rect", "hann", "hamming")


@dataclass
class RangeSpectrum:
    """Per-chirp range spectra indexed [channel][chirp][range bin]."""

    bins: np.ndarray   # (num_elev, num_chirps, samples_per_chirp) complex
    axis: np.ndarray   # (samples_per_chirp,) bin-center range, m
    cfg: RadarConfig

    @property
    def usable_bins(self) -> int:
        """Bins free of sampling ambiguity (half the band for real ADCs)."""
        n = self.bins.shape[-1]
        return n if self.cfg.complex_baseband else n // 2


def range_fft(cube: RawDataCube, window: str = "hann") -> RangeSpectrum:
    """Windowed, energy-preserving FFT over fast time.

    The transform is orthonormal so that with the rect window the per-chirp
    spectrum energy equals the time-domain energy exactly.
    """
    if window not in WINDOWS:
        raise MesimError(f"unknown window {window!r}; expected one of {WINDOWS}")
    bd = cube.samples.shape[-1]
    if window == "rect":
        taper = np.ones(bd)
    else:
        taper = get_window(window, bd, fftbins=True)
    spec = np.fft.fft(cube.samples * taper, axis=-1, norm="ortho")
    axis = np.arange(bd) * SPEED_OF_LIGHT / (2.0 * cube.cfg.bandwidth)
    return RangeSpectrum(bins=spec, axis=axis, cfg=cube.cfg)


def detect_range_bins(spectrum: RangeSpectrum, threshold_db: float) -> list[int]:
    """Bins whose noncoherent power tops the median by threshold_db.

    Only the unambiguous part of the band is searched.  Results are sorted
    ascending and duplicate-free by construction.
    """
    usable = spectrum.usable_bins
    power = np.sum(np.abs(spectrum.bins[..., :usable]) ** 2, axis=(0, 1))
    floor = float(np.median(power))
    if floor <= 0.0:
        return []
    detected = np.flatnonzero(power > floor * 10.0 ** (threshold_db / 10.0))
    return [int(b) for b in detected]


def extract_slice(spectrum: RangeSpectrum, range_bin: int) -> np.ndarray:
    """The (num_elev, num_chirps) complex matrix of one range bin."""
    nbins = spectrum.bins.shape[-1]
    if not 0 <= range_bin < nbins:
        raise MesimError(f"range bin {range_bin} outside [0, {nbins})")
    return np.ascontiguousarray(spectrum.bins[:, :, range_bin])
