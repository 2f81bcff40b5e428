"""Snapshot timing plans and tensor reshaping for the motion-extended aperture.

Moving the platform forward by half an element spacing makes the array look
as if it had gained one extra virtual azimuth position.  The plan below picks
the chirp stride that best approximates that displacement and records the
per-stride timing shortfall so steering can compensate for it.
"""

from dataclasses import dataclass

import numpy as np

from .config import EgoMotion, RadarConfig, speed_bounds
from .errors import FrameTooShortError, MesimError, SpeedRangeError


def compute_snapshot_interval(cfg: RadarConfig, motion: EgoMotion) -> int:
    """Chirp stride between snapshots: floor(spacing / (2 |vy| pri)).

    Raises SpeedRangeError when the stride would leave the frame (forward
    speed too slow) or undershoot one chirp (too fast).
    """
    v = abs(motion.vy)
    lo, hi = speed_bounds(cfg)
    if v == 0.0 or cfg.spacing / (2.0 * v * cfg.pri) > cfg.num_chirps:
        raise SpeedRangeError(
            f"forward speed {v:.6g} m/s is below the slow limit {lo:.6g} m/s "
            "(spacing / (2 * num_chirps * pri)); the snapshot stride leaves the frame"
        )
    ratio = cfg.spacing / (2.0 * v * cfg.pri)
    if ratio < 1.0:
        raise SpeedRangeError(
            f"forward speed {v:.6g} m/s is above the fast limit {hi:.6g} m/s "
            "(spacing / (2 * pri)); the platform outruns the chirp rate"
        )
    return int(np.floor(ratio))


@dataclass(frozen=True)
class SnapshotPlan:
    """Placement of the base snapshot and its motion-extended repeats."""

    interval_chirps: int        # chirp stride between snapshots
    start: int                  # chirp index of the base snapshot
    num_extra: int              # extended snapshots beyond the base one
    samples_per_snapshot: int   # slow-time samples kept per snapshot
    pri: float                  # chirp repetition interval, s
    spacing: float              # element spacing the stride approximates, m
    step_residual: float        # per-stride timing shortfall, s

    def __post_init__(self):
        if self.interval_chirps < 1 or self.start < 0 or self.num_extra < 0:
            raise MesimError("snapshot plan fields out of range")
        if self.samples_per_snapshot < 1:
            raise MesimError("samples_per_snapshot must be >= 1")

    @property
    def count(self) -> int:
        return self.num_extra + 1

    @property
    def indices(self) -> np.ndarray:
        """Starting chirp of every snapshot."""
        return self.start + self.interval_chirps * np.arange(self.count)

    def residual_time(self, n) -> np.ndarray:
        """Accumulated timing shortfall of snapshot n relative to the ideal
        half-spacing displacement, in seconds."""
        return np.asarray(n) * self.step_residual


def build_plan(
    cfg: RadarConfig,
    motion: EgoMotion,
    start: int = 0,
    num_extra="max",
    samples: int | None = None,
) -> SnapshotPlan:
    """Lay out snapshots of `samples` chirps every interval, starting at `start`.

    num_extra may be an integer or "max".  An integer request that would run
    past the end of the frame raises FrameTooShortError reporting the largest
    feasible value; a request that fits is then capped at the frame-wide
    snapshot budget.  "max" simply takes everything that fits.
    """
    interval = compute_snapshot_interval(cfg, motion)
    if samples is None:
        samples = interval
    if samples < 1:
        raise MesimError(f"samples per snapshot must be >= 1, got {samples}")
    if not 0 <= start < cfg.num_chirps:
        raise MesimError(f"snapshot start {start} outside frame [0, {cfg.num_chirps})")
    budget = cfg.num_chirps // interval - 1          # extras beyond the base snapshot
    room = (cfg.num_chirps - start - samples) // interval
    if room < 0:
        raise FrameTooShortError(
            f"frame of {cfg.num_chirps} chirps cannot hold one {samples}-chirp snapshot at {start}",
            max_extra=0,
        )
    if num_extra == "max":
        extra = min(budget, room)
    else:
        requested = int(num_extra)
        if requested < 0:
            raise MesimError(f"num_extra must be >= 0, got {num_extra}")
        if requested > room:
            raise FrameTooShortError(
                f"{requested} extended snapshots need {start + requested * interval + samples} "
                f"chirps but the frame has {cfg.num_chirps}; at most {min(budget, room)} fit",
                max_extra=min(budget, room),
            )
        extra = min(requested, budget)
    v = abs(motion.vy)
    residual = cfg.spacing / (2.0 * v) - interval * cfg.pri
    return SnapshotPlan(
        interval_chirps=interval,
        start=start,
        num_extra=max(extra, 0),
        samples_per_snapshot=int(samples),
        pri=cfg.pri,
        spacing=cfg.spacing,
        step_residual=residual,
    )


def mimo_plan(cfg: RadarConfig, start: int = 0, samples: int | None = None) -> SnapshotPlan:
    """Single-snapshot plan for the plain physical array, valid at any speed."""
    if samples is None:
        samples = cfg.num_chirps - start
    if not 0 <= start < cfg.num_chirps or start + samples > cfg.num_chirps:
        raise MesimError("baseline snapshot does not fit in the frame")
    return SnapshotPlan(
        interval_chirps=1,
        start=start,
        num_extra=0,
        samples_per_snapshot=int(samples),
        pri=cfg.pri,
        spacing=cfg.spacing,
        step_residual=0.0,
    )


@dataclass
class SnapshotTensor:
    """Slow-time windows cut per snapshot: data[n][channel][sample]."""

    data: np.ndarray
    plan: SnapshotPlan
    range_bin: int


def form_tensor(slice2d: np.ndarray, plan: SnapshotPlan, range_bin: int = -1) -> SnapshotTensor:
    """Cut the per-bin (channel, chirp) slice into per-snapshot windows."""
    slice2d = np.asarray(slice2d)
    if slice2d.ndim != 2:
        raise MesimError(f"expected a (channels, chirps) slice, got shape {slice2d.shape}")
    num_chirps = slice2d.shape[1]
    last_needed = plan.indices[-1] + plan.samples_per_snapshot
    if last_needed > num_chirps:
        raise MesimError(
            f"snapshot plan needs chirps up to {last_needed} but the slice has {num_chirps}"
        )
    cols = plan.indices[:, None] + np.arange(plan.samples_per_snapshot)[None, :]
    data = slice2d[:, cols]                 # (channels, count, samples)
    data = np.ascontiguousarray(np.transpose(data, (1, 0, 2)))
    return SnapshotTensor(data=data, plan=plan, range_bin=range_bin)


def stack(tensor: SnapshotTensor) -> np.ndarray:
    """Flatten to (count * channels, samples); row n*channels + q holds
    snapshot n of channel q, matching the steering vector ordering."""
    count, channels, samples = tensor.data.shape
    return tensor.data.reshape(count * channels, samples)


def unstack(stacked: np.ndarray, num_elev: int) -> np.ndarray:
    """Inverse of stack for a known channel count."""
    rows, samples = stacked.shape
    if rows % num_elev:
        raise MesimError(f"{rows} rows do not divide into {num_elev} channels")
    return stacked.reshape(rows // num_elev, num_elev, samples)
