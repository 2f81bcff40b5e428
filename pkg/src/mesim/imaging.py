"""Angle scanning over detected range bins.

Every method evaluates a quadratic form a^H B a on the imaging grid, with B
derived from the per-bin sample covariance (B = R for conventional
beamforming, R^-1 for the adaptive scan, the noise projector for the
subspace scan).  Because the steering vector separates into azimuth and
elevation factors, the form collapses onto block-lag sums of B, which turns
the per-direction cost from M^2 into a couple of short dot products.  A
direct per-direction evaluation is kept in dbf_power for cross-checking.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config import EgoMotion, ImagingGrid, RadarConfig
from .constants import DECHIRP_SIGN
from .errors import GeometryError, MesimError
from .rangeproc import RangeSpectrum, extract_slice
from .snapshots import SnapshotPlan, form_tensor, stack
from .steering import SteeringVector, azimuth_step_cycles, elevation_step_cycles

SCAN_METHODS = ("dbf", "mvdr", "music")
SNR_CAP_DB = 300.0

_CUBE_MAGIC = b"MESIMPWR"
_CUBE_VERSION = 1


def sample_covariance(snapshots: np.ndarray, diagonal_loading: float = 0.0) -> np.ndarray:
    """Sample covariance of stacked rows, optionally loaded on the diagonal.

    Loading is relative: the identity is scaled by trace(R) / M so the knob
    is unitless and comparable across scenes.
    """
    x = np.asarray(snapshots)
    if x.ndim != 2 or x.shape[1] < 1:
        raise MesimError(f"expected a (rows, samples) matrix, got shape {x.shape}")
    if diagonal_loading < 0.0:
        raise MesimError("diagonal_loading must be >= 0")
    r = x @ x.conj().T / x.shape[1]
    if diagonal_loading > 0.0:
        m = r.shape[0]
        r = r + diagonal_loading * (np.trace(r).real / m) * np.eye(m)
    return r


def dbf_power(covariance: np.ndarray, weights) -> float:
    """Conventional beamformed power real(w^H R w) / (w^H w).

    Accepts a plain weight vector or a SteeringVector.  This is the direct
    per-direction evaluation; scan() reproduces it through the lag-sum path.
    """
    w = np.asarray(getattr(weights, "values", weights))
    covariance = np.asarray(covariance)
    if covariance.shape != (w.size, w.size):
        raise MesimError(
            f"covariance shape {covariance.shape} does not match weight length {w.size}")
    return float(np.real(w.conj() @ covariance @ w) / np.real(w.conj() @ w))


def _lag_sums(mat: np.ndarray, count: int, num_elev: int) -> np.ndarray:
    """Sum mat over index pairs with fixed snapshot and channel offsets.

    Returns table[dn + count - 1, dq + num_elev - 1] =
    sum over (n, q) of mat[(n + dn) * num_elev + q + dq, n * num_elev + q].
    """
    q4 = mat.reshape(count, num_elev, count, num_elev)
    table = np.empty((2 * count - 1, 2 * num_elev - 1), dtype=complex)
    for dn in range(-(count - 1), count):
        if dn >= 0:
            view = q4[dn:, :, :count - dn, :]
        else:
            view = q4[:count + dn, :, -dn:, :]
        c = np.einsum("iqip->qp", view)
        for dq in range(-(num_elev - 1), num_elev):
            table[dn + count - 1, dq + num_elev - 1] = np.trace(c, offset=-dq)
    return table


def _quadratic_map(table: np.ndarray, plan: SnapshotPlan, motion: EgoMotion,
                   cfg: RadarConfig, azimuth_rad: np.ndarray,
                   elevation_rad: np.ndarray, compensate: bool) -> np.ndarray:
    """Evaluate the lag-sum table against every grid direction.

    Equals a^H B a for the steering vector of each (azimuth, elevation)
    pair, to roundoff.
    """
    count = (table.shape[0] + 1) // 2
    num_elev = (table.shape[1] + 1) // 2
    dn = np.arange(-(count - 1), count)
    dq = np.arange(-(num_elev - 1), num_elev)
    lam = cfg.wavelength
    sgn = 1j * DECHIRP_SIGN * 2.0 * np.pi
    out = np.empty((azimuth_rad.size, elevation_rad.size))
    for j, phi in enumerate(elevation_rad):
        xi = elevation_step_cycles(phi, cfg.spacing, lam)
        t = table @ np.exp(sgn * xi * dq)
        nu = azimuth_step_cycles(azimuth_rad, phi, plan, motion, lam, compensate)
        out[:, j] = np.real(np.exp(sgn * np.outer(nu, dn)) @ t)
    return out


@dataclass
class PowerCube:
    """Scanned power on a (range, azimuth, elevation) grid.

    Rows of undetected range bins are zero; `snapshots` records how many
    aperture positions the scan used.
    """

    power: np.ndarray
    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    range_bins: np.ndarray
    range_m: np.ndarray
    method: str
    compensated: bool = True
    snapshots: int = 1

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=float)
        expected = (len(self.range_bins), len(self.azimuth_deg), len(self.elevation_deg))
        if self.power.shape != expected:
            raise MesimError(f"power shape {self.power.shape} does not match axes {expected}")

    @property
    def shape(self):
        return self.power.shape


def scan(spectrum: RangeSpectrum, plan: SnapshotPlan, motion: EgoMotion,
         grid: ImagingGrid, detections=None, method: str = "dbf",
         num_sources: int | None = None, diagonal_loading: float = 0.0,
         compensate: bool = True) -> PowerCube:
    """Image detected range bins over the angular grid.

    The output spans the grid's whole range axis; rows of bins that were not
    detected stay zero.  detections defaults to every grid bin.  The
    subspace method needs num_sources; the adaptive method needs an
    invertible covariance, so pass diagonal_loading > 0 when snapshots are
    scarce.
    """
    if method not in SCAN_METHODS:
        raise MesimError(f"unknown scan method {method!r}, expected one of {SCAN_METHODS}")
    cfg = spectrum.cfg
    grid_bins = np.asarray(grid.range_bins, dtype=int)
    if detections is None:
        detections = grid_bins
    bins = np.asarray(detections, dtype=int)
    if bins.ndim != 1 or bins.size == 0:
        raise MesimError("need at least one range bin to image")
    row_of = {int(b): i for i, b in enumerate(grid_bins)}
    missing = [int(b) for b in bins if int(b) not in row_of]
    if missing:
        raise MesimError(f"detected bins {missing} are outside the imaging grid")
    m = plan.count * cfg.num_elev
    if method == "music":
        if num_sources is None or not 1 <= int(num_sources) < m:
            raise MesimError(
                f"subspace scan needs num_sources in [1, {m - 1}], got {num_sources}")
        num_sources = int(num_sources)
    az = np.deg2rad(grid.azimuth_deg)
    el = np.deg2rad(grid.elevation_deg)
    power = np.zeros((grid_bins.size, az.size, el.size))
    eye = np.eye(m)
    for b in bins:
        x = stack(form_tensor(extract_slice(spectrum, int(b)), plan, int(b)))
        r = sample_covariance(x, diagonal_loading)
        if method == "dbf":
            table = _lag_sums(r, plan.count, cfg.num_elev)
            quad = _quadratic_map(table, plan, motion, cfg, az, el, compensate)
            cell = np.maximum(quad, 0.0) / m
        elif method == "mvdr":
            try:
                factor = scipy.linalg.cho_factor(r)
            except np.linalg.LinAlgError as exc:
                raise MesimError(
                    "covariance is singular in the adaptive scan; "
                    "set diagonal_loading > 0 or use more samples") from exc
            rinv = scipy.linalg.cho_solve(factor, eye)
            table = _lag_sums(rinv, plan.count, cfg.num_elev)
            quad = _quadratic_map(table, plan, motion, cfg, az, el, compensate)
            cell = m / np.maximum(quad, np.finfo(float).tiny)
        else:
            _, vecs = scipy.linalg.eigh(r)
            sub = vecs[:, -num_sources:]
            projector = eye - sub @ sub.conj().T
            table = _lag_sums(projector, plan.count, cfg.num_elev)
            quad = _quadratic_map(table, plan, motion, cfg, az, el, compensate)
            cell = 1.0 / np.maximum(quad, np.finfo(float).tiny)
        power[row_of[int(b)]] = cell
    return PowerCube(power=power, azimuth_deg=np.asarray(grid.azimuth_deg, dtype=float),
                     elevation_deg=np.asarray(grid.elevation_deg, dtype=float),
                     range_bins=grid_bins,
                     range_m=np.asarray(grid.range_m, dtype=float),
                     method=method, compensated=bool(compensate),
                     snapshots=plan.count)


def measure_snr(cube: PowerCube, truth_cell, noise_mask: np.ndarray | None = None,
                radius: int = 1) -> float:
    """Peak power near the truth cell over mean power elsewhere, in dB.

    The default noise region is the truth range slice with a guard box of
    four times the search radius blanked around the truth direction.  Capped
    at SNR_CAP_DB so noise-free images stay finite.
    """
    ir, it, ip = (int(v) for v in truth_cell)
    nr, nt, np_ = cube.shape
    if not (0 <= ir < nr and 0 <= it < nt and 0 <= ip < np_):
        raise MesimError(f"truth cell {truth_cell} outside cube shape {cube.shape}")
    sl = cube.power[ir,
                    max(it - radius, 0):it + radius + 1,
                    max(ip - radius, 0):ip + radius + 1]
    signal = float(sl.max())
    if noise_mask is None:
        noise_mask = np.zeros(cube.shape, dtype=bool)
        noise_mask[ir] = True
        guard = 4 * radius
        noise_mask[ir,
                   max(it - guard, 0):it + guard + 1,
                   max(ip - guard, 0):ip + guard + 1] = False
    if noise_mask.shape != cube.shape:
        raise MesimError("noise mask shape does not match the cube")
    if not noise_mask.any():
        raise MesimError("noise mask selects no cells")
    noise = float(cube.power[noise_mask].mean())
    if noise <= 0.0 or signal <= 0.0:
        return SNR_CAP_DB
    return min(10.0 * np.log10(signal / noise), SNR_CAP_DB)


PROJECTION_METHODS = ("nearest", "trilinear")


@dataclass
class CartesianVolume:
    """Power resampled onto an axis-aligned voxel grid."""

    values: np.ndarray
    origin: np.ndarray
    voxel_size: float

    def centers(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.voxel_size


def project_to_cartesian(cube: PowerCube, voxel_size: float,
                         method: str = "nearest") -> CartesianVolume:
    """Resample the polar cube into cartesian voxels.

    nearest sums the cells landing in a voxel, so total power is conserved;
    trilinear spreads each cell's power over the eight surrounding voxel
    centers instead.
    """
    if method not in PROJECTION_METHODS:
        raise MesimError(f"unknown projection {method!r}, expected one of {PROJECTION_METHODS}")
    if voxel_size <= 0.0:
        raise MesimError("voxel_size must be positive")
    r = cube.range_m[:, None, None]
    th = np.deg2rad(cube.azimuth_deg)[None, :, None]
    ph = np.deg2rad(cube.elevation_deg)[None, None, :]
    x = np.broadcast_to(r * np.cos(th) * np.cos(ph), cube.shape).ravel()
    y = np.broadcast_to(r * np.sin(th) * np.cos(ph), cube.shape).ravel()
    z = np.broadcast_to(r * np.sin(ph), cube.shape).ravel()
    w = cube.power.ravel()
    origin = np.array([x.min(), y.min(), z.min()])
    shape = tuple(int(np.floor((c.max() - o) / voxel_size)) + 1
                  for c, o in zip((x, y, z), origin))
    if np.prod(shape, dtype=float) > 1e8:
        raise GeometryError(
            f"voxel grid {shape} exceeds the size guard; increase voxel_size")
    vol = np.zeros(shape)
    if method == "nearest":
        idx = tuple(np.floor((c - o) / voxel_size).astype(int)
                    for c, o in zip((x, y, z), origin))
        np.add.at(vol, idx, w)
    else:
        g = [(c - o) / voxel_size - 0.5 for c, o in zip((x, y, z), origin)]
        i0 = [np.floor(gi).astype(int) for gi in g]
        fr = [gi - lo for gi, lo in zip(g, i0)]
        for corner in range(8):
            pick = [(corner >> axis) & 1 for axis in range(3)]
            idx = tuple(np.clip(i0[axis] + pick[axis], 0, shape[axis] - 1)
                        for axis in range(3))
            weight = np.prod([fr[axis] if pick[axis] else 1.0 - fr[axis]
                              for axis in range(3)], axis=0)
            np.add.at(vol, idx, w * weight)
    return CartesianVolume(values=vol, origin=origin, voxel_size=float(voxel_size))


def save_power_cube(path, cube: PowerCube) -> None:
    """Write the cube: fixed header, float64 axes, then float32 values."""
    nr, nt, np_ = cube.shape
    method = cube.method.encode("ascii")
    if len(method) > 8:
        raise MesimError(f"method tag {cube.method!r} too long to store")
    header = _CUBE_MAGIC + struct.pack(
        "<II8sIIII", _CUBE_VERSION, int(cube.compensated), method.ljust(8, b"\0"),
        int(cube.snapshots), nr, nt, np_)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(cube.azimuth_deg, dtype="<f8").tobytes())
        fh.write(np.asarray(cube.elevation_deg, dtype="<f8").tobytes())
        fh.write(np.asarray(cube.range_bins, dtype="<f8").tobytes())
        fh.write(np.asarray(cube.range_m, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(cube.power, dtype="<f4").tobytes())


def load_power_cube(path) -> PowerCube:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _CUBE_MAGIC:
        raise MesimError(f"{path} is not a power cube file")
    header_size = 8 + struct.calcsize("<II8sIIII")
    if len(raw) < header_size:
        raise MesimError(f"{path} is truncated")
    version, comp, method, snaps, nr, nt, np_ = struct.unpack_from("<II8sIIII", raw, 8)
    if version != _CUBE_VERSION:
        raise MesimError(f"unsupported power cube version {version}")
    off = header_size
    expected = header_size + 8 * (nt + np_ + 2 * nr) + 4 * nr * nt * np_
    if len(raw) < expected:
        raise MesimError(f"{path} is truncated")

    def take(dtype, n):
        nonlocal off
        arr = np.frombuffer(raw, dtype=dtype, count=n, offset=off)
        off += arr.nbytes
        return arr

    az = take("<f8", nt).astype(float)
    el = take("<f8", np_).astype(float)
    bins = take("<f8", nr).astype(int)
    rng = take("<f8", nr).astype(float)
    need = nr * nt * np_
    if len(raw) - off < need * 4:
        raise MesimError(f"{path} is truncated")
    power = take("<f4", need).astype(float).reshape(nr, nt, np_)
    return PowerCube(power=power, azimuth_deg=az, elevation_deg=el,
                     range_bins=bins, range_m=rng,
                     method=method.rstrip(b"\0").decode("ascii"),
                     compensated=bool(comp), snapshots=int(snaps))
