"""Steering vectors for the motion-extended array.

Angles are radians throughout: theta is azimuth measured from boresight (x)
toward the direction of travel (y), phi is elevation toward z.  Phases follow
the sign convention in constants.py: the data advances as exp(-j 2 pi w n),
so steering applies the same factor and the beamformer conjugates it.
"""

from dataclasses import dataclass

import numpy as np

from .config import EgoMotion, RadarConfig
from .constants import DECHIRP_SIGN
from .errors import MesimError
from .snapshots import SnapshotPlan


def radial_speed(theta, phi, motion: EgoMotion):
    """Closing speed toward a far-field point at (theta, phi), m/s."""
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    return motion.vx * ct * cp + motion.vy * st * cp + motion.vz * sp


def azimuth_step_cycles(theta, phi, plan: SnapshotPlan, motion: EgoMotion,
                        wavelength: float, compensate: bool = True):
    """Phase advance per snapshot stride across the synthesized aperture,
    in cycles.

    compensate=True uses the platform's measured velocity and the actual
    stride duration (two-way propagation, hence the factor 2).
    compensate=False assumes each stride displaced the platform by exactly
    half an element spacing along y, which is only ever approximately true.
    """
    if compensate:
        dt = plan.interval_chirps * plan.pri
        return 2.0 * radial_speed(theta, phi, motion) * dt / wavelength
    step = 0.5 * plan.spacing * np.sign(motion.vy)
    return 2.0 * step * np.sin(theta) * np.cos(phi) / wavelength


def elevation_step_cycles(phi, spacing: float, wavelength: float):
    """Phase advance per physical channel, in cycles."""
    return spacing * np.sin(phi) / wavelength


def compensation_phase(plan: SnapshotPlan, motion: EgoMotion, theta, phi,
                       n, wavelength: float):
    """Cycles by which snapshot n's actual phase trails the ideal
    half-spacing-per-stride model.  Linear in n."""
    delta = (azimuth_step_cycles(theta, phi, plan, motion, wavelength, compensate=True)
             - azimuth_step_cycles(theta, phi, plan, motion, wavelength, compensate=False))
    return np.asarray(n) * delta


def compensation_table(plan: SnapshotPlan, motion: EgoMotion,
                       azimuth_rad: np.ndarray, elevation_rad: np.ndarray,
                       wavelength: float) -> np.ndarray:
    """Per-stride correction in cycles on an (azimuth, elevation) grid.

    Multiply by the snapshot index to get the full correction; the dependence
    on the index is exactly linear.
    """
    th = np.asarray(azimuth_rad)[:, None]
    ph = np.asarray(elevation_rad)[None, :]
    return (azimuth_step_cycles(th, ph, plan, motion, wavelength, compensate=True)
            - azimuth_step_cycles(th, ph, plan, motion, wavelength, compensate=False))


@dataclass(frozen=True)
class SteeringVector:
    """Stacked steering vector; entry n * num_elev + q pairs snapshot n with
    channel q, matching the stacked data row order."""

    values: np.ndarray
    theta: float
    phi: float
    compensated: bool

    def __len__(self):
        return self.values.shape[0]


def steering_vector(theta: float, phi: float, plan: SnapshotPlan,
                    motion: EgoMotion, cfg: RadarConfig,
                    compensate: bool = True) -> SteeringVector:
    """Joint azimuth/elevation steering vector for one look direction."""
    lam = cfg.wavelength
    nu = azimuth_step_cycles(theta, phi, plan, motion, lam, compensate)
    xi = elevation_step_cycles(phi, cfg.spacing, lam)
    n = np.arange(plan.count)
    q = np.arange(cfg.num_elev)
    a_az = np.exp(-1j * DECHIRP_SIGN * 2.0 * np.pi * nu * n)
    a_el = np.exp(-1j * DECHIRP_SIGN * 2.0 * np.pi * xi * q)
    return SteeringVector(values=np.kron(a_az, a_el), theta=float(theta),
                          phi=float(phi), compensated=bool(compensate))


def dbf_weight(sv: SteeringVector) -> np.ndarray:
    """Unit-norm conventional beamforming weight for this direction."""
    m = len(sv)
    if m == 0:
        raise MesimError("empty steering vector")
    return sv.values / np.sqrt(m)
