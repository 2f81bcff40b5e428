"""Waveform, sampling, array and platform-motion parameters.

All quantities are SI.  Angles follow the side-looking convention: azimuth
theta is measured from the boresight x axis toward the direction of travel
y, elevation phi from the xy plane toward z, so a point at range r sits at
(r*cos(theta)*cos(phi), r*sin(theta)*cos(phi), r*sin(phi)).
"""

from dataclasses import dataclass
import enum
import math

import numpy as np

from .constants import SPEED_OF_LIGHT
from .errors import ConfigError


@dataclass(frozen=True)
class RadarConfig:
    """FMCW waveform and elevation-array geometry.

    Attributes:
        start_freq: chirp start frequency, Hz.
        bandwidth: swept bandwidth, Hz.
        chirp_duration: active sweep time of one chirp, s.
        sample_rate: ADC rate, samples/s.
        pri: chirp repetition interval, s.
        num_chirps: chirps per frame.
        num_elev: virtual elevation channels.
        spacing: element spacing, m.  Defaults to half a wavelength.
        complex_baseband: if True the ADC delivers complex samples and the
            full beat spectrum is usable; the default models real sampling
            where only the lower half is unambiguous.
    """

    start_freq: float
    bandwidth: float
    chirp_duration: float
    sample_rate: float
    pri: float
    num_chirps: int
    num_elev: int
    spacing: float | None = None
    complex_baseband: bool = False

    def __post_init__(self):
        for name in ("start_freq", "bandwidth", "chirp_duration", "sample_rate", "pri"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"radar.{name} must be a positive finite number, got {value!r}")
        if self.num_chirps < 1:
            raise ConfigError(f"radar.num_chirps must be >= 1, got {self.num_chirps}")
        if self.num_elev < 1:
            raise ConfigError(f"radar.num_elev must be >= 1, got {self.num_elev}")
        if self.pri < self.chirp_duration:
            raise ConfigError(
                f"radar.pri ({self.pri}) is shorter than radar.chirp_duration ({self.chirp_duration})"
            )
        if self.samples_per_chirp < 8:
            raise ConfigError(
                f"chirp_duration * sample_rate gives only {self.samples_per_chirp} "
                "fast-time samples; at least 8 are required"
            )
        if self.spacing is None:
            object.__setattr__(self, "spacing", 0.5 * self.wavelength)
        elif not (math.isfinite(self.spacing) and self.spacing > 0):
            raise ConfigError(f"radar.spacing must be positive, got {self.spacing!r}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.start_freq

    @property
    def slope(self) -> float:
        """Frequency sweep rate, Hz/s."""
        return self.bandwidth / self.chirp_duration

    @property
    def samples_per_chirp(self) -> int:
        return int(round(self.chirp_duration * self.sample_rate))


@dataclass(frozen=True)
class EgoMotion:
    """Constant platform velocity over one frame, m/s."""

    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0

    def __post_init__(self):
        for name in ("vx", "vy", "vz"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ConfigError(f"motion.{name} must be finite, got {value!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz], dtype=float)


@dataclass(frozen=True)
class DerivedParams:
    """Quantities derived from a RadarConfig."""

    slope: float              # Hz/s
    wavelength: float         # m
    samples_per_chirp: int
    range_resolution: float   # m
    unambiguous_range: float  # m


def derived_params(cfg: RadarConfig) -> DerivedParams:
    """Derive sweep rate, wavelength, sample count and range limits.

    The unambiguous range assumes real ADC sampling (usable beat band
    sample_rate/2) unless the config selects complex baseband.
    """
    unamb = cfg.sample_rate * SPEED_OF_LIGHT / (2.0 * cfg.slope)
    if not cfg.complex_baseband:
        unamb *= 0.5
    return DerivedParams(
        slope=cfg.slope,
        wavelength=cfg.wavelength,
        samples_per_chirp=cfg.samples_per_chirp,
        range_resolution=SPEED_OF_LIGHT / (2.0 * cfg.bandwidth),
        unambiguous_range=unamb,
    )


class SpeedCheck(enum.Enum):
    OK = "ok"
    TOO_SLOW = "too-slow"
    TOO_FAST = "too-fast"


def speed_bounds(cfg: RadarConfig) -> tuple[float, float]:
    """Usable |vy| window [d/(2*Ld*pri), d/(2*pri)] for snapshot imaging."""
    upper = cfg.spacing / (2.0 * cfg.pri)
    return upper / cfg.num_chirps, upper


def validate_speed(cfg: RadarConfig, motion: EgoMotion) -> SpeedCheck:
    """Classify the forward speed against the usable snapshot window."""
    lo, hi = speed_bounds(cfg)
    v = abs(motion.vy)
    if v < lo:
        return SpeedCheck.TOO_SLOW
    if v > hi:
        return SpeedCheck.TOO_FAST
    return SpeedCheck.OK


def _regular_axis(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    if hi < lo:
        raise ConfigError(f"grid bounds out of order: [{lo}, {hi}]")
    n = int(math.floor((hi - lo) / step + 0.5)) + 1
    return lo + step * np.arange(n)


@dataclass(eq=False)
class ImagingGrid:
    """Output sampling of the power image.

    Angle axes are in degrees; range_bins indexes fast-time spectrum bins and
    range_m holds the matching bin-center ranges.
    """

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    range_bins: np.ndarray
    range_m: np.ndarray

    def __post_init__(self):
        self.azimuth_deg = np.asarray(self.azimuth_deg, dtype=float)
        self.elevation_deg = np.asarray(self.elevation_deg, dtype=float)
        self.range_bins = np.asarray(self.range_bins, dtype=int)
        self.range_m = np.asarray(self.range_m, dtype=float)
        for name in ("azimuth_deg", "elevation_deg"):
            axis = getattr(self, name)
            if axis.ndim != 1 or axis.size == 0:
                raise ConfigError(f"grid.{name} must be a non-empty 1-d axis")
            if np.any(np.diff(axis) <= 0):
                raise ConfigError(f"grid.{name} must be strictly increasing")
            if np.any(np.abs(axis) > 90.0):
                raise ConfigError(f"grid.{name} must stay within [-90, 90] degrees")
        if self.range_bins.ndim != 1 or self.range_bins.size == 0:
            raise ConfigError("grid needs at least one range bin")
        if np.any(np.diff(self.range_bins) <= 0) or np.any(self.range_bins < 0):
            raise ConfigError("grid.range_bins must be strictly increasing and non-negative")
        if self.range_m.shape != self.range_bins.shape:
            raise ConfigError("grid.range_m must match grid.range_bins in length")

    @classmethod
    def regular(
        cls,
        cfg: RadarConfig,
        azimuth: tuple[float, float, float] = (-90.0, 90.0, 1.0),
        elevation: tuple[float, float, float] = (-90.0, 90.0, 1.0),
        range_window: tuple[float, float] | None = None,
    ) -> "ImagingGrid":
        """Build a uniform grid covering the usable beat band of cfg."""
        nbins = cfg.samples_per_chirp if cfg.complex_baseband else cfg.samples_per_chirp // 2
        bins = np.arange(nbins)
        centers = bins * SPEED_OF_LIGHT / (2.0 * cfg.bandwidth)
        if range_window is not None:
            lo, hi = range_window
            keep = (centers >= lo) & (centers <= hi)
            if not np.any(keep):
                raise ConfigError(f"grid range window [{lo}, {hi}] m selects no bins")
            bins, centers = bins[keep], centers[keep]
        return cls(
            azimuth_deg=_regular_axis(*azimuth),
            elevation_deg=_regular_axis(*elevation),
            range_bins=bins,
            range_m=centers,
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.range_bins), len(self.azimuth_deg), len(self.elevation_deg)
