"""De-chirped frame synthesis for a scene seen by the moving elevation array."""

from dataclasses import dataclass
import struct

import numpy as np

from .config import EgoMotion, RadarConfig
from .constants import DECHIRP_SIGN, SPEED_OF_LIGHT
from .errors import EmptySceneError, GeometryError, MesimError, UndefinedSnrError
from .scene import Scene, spherical_coords

SIM_MODES = ("geometric", "literal")
_MIN_RANGE = 1e-3  # m, below this the geometry is treated as singular

_CUBE_MAGIC = b"MESIMRAW"
_CUBE_VERSION = 1


@dataclass
class RawDataCube:
    """De-chirped samples indexed [channel][chirp][fast-time sample]."""

    samples: np.ndarray  # (num_elev, num_chirps, samples_per_chirp) complex
    cfg: RadarConfig
    motion: EgoMotion

    def __post_init__(self):
        expected = (self.cfg.num_elev, self.cfg.num_chirps, self.cfg.samples_per_chirp)
        if self.samples.shape != expected:
            raise MesimError(f"cube shape {self.samples.shape} does not match config {expected}")


def _check_scene(scene: Scene):
    if len(scene) == 0:
        raise EmptySceneError("cannot simulate an empty scene")
    rng = np.linalg.norm(scene.positions, axis=1)
    if np.any(rng < _MIN_RANGE):
        raise GeometryError("scatterer at (near-)zero range makes the geometry singular")
    if np.any(scene.positions[:, 0] <= 0):
        raise GeometryError("side-looking scenes need every scatterer at x > 0")


def simulate_frame(
    scene: Scene,
    cfg: RadarConfig,
    motion: EgoMotion,
    noise_power: float = 0.0,
    seed: int = 0,
    mode: str = "geometric",
    range_attenuation: bool = False,
) -> RawDataCube:
    """Synthesise one de-chirped frame.

    In "geometric" mode each channel is a monostatic transceiver at height
    q*spacing/2 (the midpoint-equivalent of virtual channels spaced by
    `spacing`); exact two-way ranges are evaluated per chirp, with the
    platform frozen within each chirp.  In "literal" mode every scatterer is
    reduced to fixed (range, angles, radial speed) at frame start and the
    phase terms are generated from those constants, which matches the
    geometric mode to first order in the far field.

    Args:
        noise_power: per-sample complex noise power added after synthesis.
        seed: counter-based noise stream seed.
        range_attenuation: divide amplitudes by range squared when True.
    """
    if mode not in SIM_MODES:
        raise MesimError(f"unknown simulation mode {mode!r}; expected one of {SIM_MODES}")
    if noise_power < 0:
        raise MesimError("noise_power must be >= 0")
    _check_scene(scene)

    ne, ld, bd = cfg.num_elev, cfg.num_chirps, cfg.samples_per_chirp
    samples = np.zeros((ne, ld, bd), dtype=complex)
    two_pi = 2.0 * np.pi * DECHIRP_SIGN

    if mode == "geometric":
        t_chirp = np.arange(ld) * cfg.pri
        platform = t_chirp[:, None] * motion.vector[None, :]          # (ld, 3)
        frac_fast = np.arange(bd) / cfg.sample_rate                   # (bd,)
        for q in range(ne):
            antenna = platform.copy()
            antenna[:, 2] += 0.5 * q * cfg.spacing
            for pos, amp in zip(scene.positions, scene.amplitudes):
                dist = np.linalg.norm(pos[None, :] - antenna, axis=1)  # (ld,)
                if np.any(dist < _MIN_RANGE):
                    raise GeometryError("platform passes through a scatterer during the frame")
                tau = 2.0 * dist / SPEED_OF_LIGHT
                gain = amp / dist**2 if range_attenuation else amp
                phase = two_pi * (cfg.start_freq * tau[:, None]
                                  + cfg.slope * tau[:, None] * frac_fast[None, :])
                if np.isscalar(gain):
                    samples[q] += gain * np.exp(1j * phase)
                else:
                    samples[q] += gain[:, None] * np.exp(1j * phase)
    else:
        rng0, theta, phi = spherical_coords(scene.positions)
        v_rad = (motion.vx * np.cos(theta) * np.cos(phi)
                 + motion.vy * np.sin(theta) * np.cos(phi)
                 + motion.vz * np.sin(phi))
        tau0 = 2.0 * rng0 / SPEED_OF_LIGHT
        lam = cfg.wavelength
        q_axis = np.arange(ne)
        l_axis = np.arange(ld)
        b_axis = np.arange(bd)
        for k in range(len(scene)):
            amp = scene.amplitudes[k] / rng0[k] ** 2 if range_attenuation else scene.amplitudes[k]
            carrier = np.exp(1j * two_pi * cfg.start_freq * tau0[k])
            elev = np.exp(-1j * two_pi * q_axis * cfg.spacing * np.sin(phi[k]) / lam)
            slow = np.exp(-1j * two_pi * (2.0 * v_rad[k] / lam) * cfg.pri * l_axis)
            fast = np.exp(1j * two_pi * cfg.slope * tau0[k] * b_axis / cfg.sample_rate)
            samples += (amp * carrier) * elev[:, None, None] * slow[None, :, None] * fast[None, None, :]

    if noise_power > 0:
        rng = np.random.Generator(np.random.Philox(seed))
        scale = np.sqrt(noise_power / 2.0)
        samples = samples + scale * (rng.standard_normal(samples.shape)
                                     + 1j * rng.standard_normal(samples.shape))
    return RawDataCube(samples=samples, cfg=cfg, motion=motion)


def add_noise(cube: RawDataCube, snr_db: float, seed: int) -> RawDataCube:
    """Return a new cube with complex white noise at the requested mean SNR."""
    signal_power = float(np.mean(np.abs(cube.samples) ** 2))
    if signal_power == 0.0:
        raise UndefinedSnrError("cube holds no signal energy; SNR is undefined")
    noise_power = signal_power / 10.0 ** (snr_db / 10.0)
    rng = np.random.Generator(np.random.Philox(seed))
    scale = np.sqrt(noise_power / 2.0)
    noisy = cube.samples + scale * (rng.standard_normal(cube.samples.shape)
                                    + 1j * rng.standard_normal(cube.samples.shape))
    return RawDataCube(samples=noisy, cfg=cube.cfg, motion=cube.motion)


# ---------- binary cube files ----------


def save_cube(cube: RawDataCube, path):
    """Write the cube as header + interleaved little-endian float32 pairs."""
    ne, ld, bd = cube.samples.shape
    header = _CUBE_MAGIC + struct.pack("<II", _CUBE_VERSION, 0) + struct.pack("<III", ne, ld, bd)
    payload = np.ascontiguousarray(cube.samples.astype("<c8")).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_cube(path, cfg: RadarConfig, motion: EgoMotion) -> RawDataCube:
    """Read a cube file written by save_cube and bind it to cfg and motion."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 28 or raw[:8] != _CUBE_MAGIC:
        raise MesimError(f"{path}: not a raw data cube file")
    version, _ = struct.unpack("<II", raw[8:16])
    if version != _CUBE_VERSION:
        raise MesimError(f"{path}: unsupported cube version {version}")
    ne, ld, bd = struct.unpack("<III", raw[16:28])
    expected_bytes = 28 + ne * ld * bd * 8
    if len(raw) != expected_bytes:
        raise MesimError(f"{path}: truncated cube file ({len(raw)} of {expected_bytes} bytes)")
    data = np.frombuffer(raw[28:], dtype="<c8").reshape(ne, ld, bd).astype(complex)
    return RawDataCube(samples=data, cfg=cfg, motion=motion)
