"""Point-scatterer scenes: construction, file ingestion, resampling."""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySceneError, MalformedInputError, MesimError

POINT_CLOUD_FORMATS = ("xyz-text", "ply-ascii")


@dataclass(frozen=True)
class Scatterer:
    """A single ideal point reflector."""

    position: np.ndarray  # (3,) m
    amplitude: complex

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise MesimError(f"scatterer position must be a finite 3-vector, got {self.position!r}")
        if not np.isfinite(self.amplitude) or abs(self.amplitude) == 0:
            raise MesimError("scatterer amplitude must be finite and non-zero")
        object.__setattr__(self, "position", pos)


@dataclass
class Scene:
    """An ordered collection of point scatterers."""

    positions: np.ndarray                 # (N, 3) m
    amplitudes: np.ndarray | None = None  # (N,) complex, defaults to ones
    label: str = ""

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.size == 0:
            pos = pos.reshape(0, 3)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise MesimError(f"scene positions must have shape (N, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise MesimError("scene positions must be finite")
        if self.amplitudes is None:
            amps = np.ones(len(pos), dtype=complex)
        else:
            amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (len(pos),):
            raise MesimError(f"expected {len(pos)} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)) or np.any(np.abs(amps) == 0):
            raise MesimError("scene amplitudes must be finite and non-zero")
        self.positions = pos
        self.amplitudes = amps

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def scatterers(self) -> list[Scatterer]:
        return [Scatterer(p, a) for p, a in zip(self.positions, self.amplitudes)]


def spherical_coords(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (range, azimuth, elevation) in metres and radians for xyz points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rng = np.linalg.norm(pts, axis=1)
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    with np.errstate(invalid="ignore"):
        phi = np.arcsin(np.clip(pts[:, 2] / np.where(rng > 0, rng, 1.0), -1.0, 1.0))
    return rng, theta, phi


# ---------- file ingestion ----------


def load_point_cloud(path, fmt: str = "xyz-text") -> Scene:
    """Read a point cloud file into a Scene with unit amplitudes.

    Args:
        path: file to read.
        fmt: one of "xyz-text" (whitespace separated x y z per line) or
            "ply-ascii".

    Raises:
        MalformedInputError: on parse failures, naming the offending line.
        EmptySceneError: if the file holds no points.
    """
    if fmt not in POINT_CLOUD_FORMATS:
        raise MesimError(f"unknown point cloud format {fmt!r}; expected one of {POINT_CLOUD_FORMATS}")
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        lines = fh.read().splitlines()
    if fmt == "xyz-text":
        points = _parse_xyz(path, lines)
    else:
        points = _parse_ply(path, lines)
    if len(points) == 0:
        raise EmptySceneError(f"{path}: no points found")
    return Scene(positions=np.array(points, dtype=float), label=str(path))


def _parse_xyz(path, lines):
    points = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) < 3:
            raise MalformedInputError(path, lineno, f"expected 3 coordinates, got {len(tokens)}")
        try:
            points.append([float(t) for t in tokens[:3]])
        except ValueError as exc:
            raise MalformedInputError(path, lineno, f"non-numeric coordinate: {exc}") from None
    return points


def _parse_ply(path, lines):
    if not lines or lines[0].strip() != "ply":
        raise MalformedInputError(path, 1, "missing 'ply' magic line")
    vertex_count = None
    vertex_props = []
    in_vertex_element = False
    data_start = None
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        keyword = tokens[0]
        if keyword == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise MalformedInputError(path, lineno, "only ascii PLY is supported")
        elif keyword == "element":
            in_vertex_element = len(tokens) >= 3 and tokens[1] == "vertex"
            if in_vertex_element:
                try:
                    vertex_count = int(tokens[2])
                except ValueError:
                    raise MalformedInputError(path, lineno, "bad vertex count") from None
        elif keyword == "property" and in_vertex_element:
            if len(tokens) >= 3 and tokens[1] != "list":
                vertex_props.append(tokens[2])
        elif keyword == "end_header":
            data_start = lineno + 1
            break
    if data_start is None:
        raise MalformedInputError(path, len(lines), "missing end_header")
    if vertex_count is None:
        raise MalformedInputError(path, data_start - 1, "header declares no vertex element")
    try:
        cols = [vertex_props.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise MalformedInputError(path, data_start - 1, "vertex element lacks x/y/z properties") from None
    points = []
    lineno = data_start - 1
    for line in lines[data_start - 1:]:
        lineno += 1
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) < len(vertex_props):
            raise MalformedInputError(path, lineno, f"expected {len(vertex_props)} vertex fields, got {len(tokens)}")
        try:
            points.append([float(tokens[c]) for c in cols])
        except ValueError as exc:
            raise MalformedInputError(path, lineno, f"non-numeric coordinate: {exc}") from None
        if len(points) == vertex_count:
            break
    if vertex_count and len(points) < vertex_count:
        raise MalformedInputError(path, lineno, f"expected {vertex_count} vertices, found {len(points)}")
    return points


# ---------- resampling and amplitude assignment ----------


def resample_uniform(scene: Scene, target_count: int, seed: int) -> Scene:
    """Resample a scene toward uniform spatial density over its occupied volume.

    The bounding box is split into a voxel lattice sized so the mean occupancy
    is at least four points per voxel; an equal quota is then drawn from every
    occupied voxel (with replacement where a voxel is sparser than its quota).
    """
    if target_count < 1:
        raise MesimError(f"target_count must be >= 1, got {target_count}")
    if len(scene) == 0:
        raise EmptySceneError("cannot resample an empty scene")
    rng = np.random.Generator(np.random.Philox(seed))
    pos = scene.positions
    lo = pos.min(axis=0)
    extent = pos.max(axis=0) - lo
    bins = max(1, int(np.floor((len(scene) / 4.0) ** (1.0 / 3.0))))
    safe_extent = np.where(extent > 0, extent, 1.0)
    idx3 = np.minimum((bins * (pos - lo) / safe_extent).astype(int), bins - 1)
    flat = (idx3[:, 0] * bins + idx3[:, 1]) * bins + idx3[:, 2]
    order = np.argsort(flat, kind="stable")
    voxel_ids, starts = np.unique(flat[order], return_index=True)
    groups = np.split(order, starts[1:])

    occupied = len(groups)
    base, leftover = divmod(target_count, occupied)
    quotas = np.full(occupied, base, dtype=int)
    quotas[rng.permutation(occupied)[:leftover]] += 1

    chosen = []
    for members, quota in zip(groups, quotas):
        if quota == 0:
            continue
        if quota <= len(members):
            pick = rng.choice(len(members), size=quota, replace=False)
        else:
            pick = rng.integers(0, len(members), size=quota)
        chosen.append(members[pick])
    sel = np.concatenate(chosen)
    return Scene(positions=pos[sel], amplitudes=scene.amplitudes[sel], label=scene.label)


def assign_swerling3_amplitudes(scene: Scene, lo: float, hi: float, seed: int) -> Scene:
    """Draw per-scatterer magnitudes uniformly from [lo, hi] with zero phase."""
    if not (0 < lo < hi):
        raise MesimError(f"amplitude bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]")
    rng = np.random.Generator(np.random.Philox(seed))
    mags = rng.uniform(lo, hi, size=len(scene))
    return Scene(positions=scene.positions.copy(), amplitudes=mags.astype(complex), label=scene.label)


def box_cloud(center, size, count: int, seed: int) -> Scene:
    """Uniformly random points filling an axis-aligned box, unit amplitudes."""
    if count < 1:
        raise MesimError(f"count must be >= 1, got {count}")
    center = np.asarray(center, dtype=float)
    size = np.asarray(size, dtype=float)
    if center.shape != (3,) or size.shape != (3,) or np.any(size < 0):
        raise MesimError("box_cloud needs a 3-vector center and non-negative 3-vector size")
    rng = np.random.Generator(np.random.Philox(seed))
    pts = center + size * (rng.random((count, 3)) - 0.5)
    return Scene(positions=pts)
