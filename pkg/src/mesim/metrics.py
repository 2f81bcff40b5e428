"""Detection-style scoring and image quality measures.

Rates that would divide by zero are reported as None rather than zero so a
degenerate scene (no occupied cells, or no empty ones) is visible in the
output instead of silently scoring.
"""

from dataclasses import dataclass

import numpy as np

from .config import ImagingGrid
from .errors import MesimError
from .scene import Scene, spherical_coords


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class MetricsReport:
    """Confusion-derived rates; fields are None when their denominator is 0.

    Contrast and dynamic range are filled in by callers that have the image
    volumes at hand; they stay None for a pure confusion report.
    """

    counts: ConfusionCounts
    precision: float | None
    sensitivity: float | None
    specificity: float | None
    accuracy: float | None
    f_score: float | None
    auc: float | None
    contrast: dict | None = None
    dynamic_range_ratio: float | None = None

    def as_dict(self) -> dict:
        out = {
            "tp": self.counts.tp, "fp": self.counts.fp,
            "fn": self.counts.fn, "tn": self.counts.tn,
            "precision": self.precision, "sensitivity": self.sensitivity,
            "specificity": self.specificity, "accuracy": self.accuracy,
            "f_score": self.f_score, "auc": self.auc,
        }
        if self.contrast is not None:
            out["contrast"] = dict(self.contrast)
        if self.dynamic_range_ratio is not None:
            out["dynamic_range_ratio"] = self.dynamic_range_ratio
        return out


def voxelise(values, threshold_db: float) -> np.ndarray:
    """Occupancy by thresholding above the positive-value median floor.

    A cell counts as occupied when it sits more than threshold_db above the
    median of the positive cells.  Accepts a power cube or a plain array.
    """
    values = np.asarray(getattr(values, "power", values), dtype=float)
    positive = values[values > 0.0]
    if positive.size == 0:
        raise MesimError("cube has no positive cells, cannot voxelise")
    floor = np.median(positive)
    return values > floor * 10.0 ** (threshold_db / 10.0)


def confusion(predicted: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if predicted.shape != truth.shape:
        raise MesimError(
            f"prediction shape {predicted.shape} does not match truth {truth.shape}")
    return ConfusionCounts(
        tp=int(np.sum(predicted & truth)),
        fp=int(np.sum(predicted & ~truth)),
        fn=int(np.sum(~predicted & truth)),
        tn=int(np.sum(~predicted & ~truth)),
    )


def report(counts: ConfusionCounts) -> MetricsReport:
    def rate(num, den):
        return num / den if den else None

    precision = rate(counts.tp, counts.tp + counts.fp)
    sensitivity = rate(counts.tp, counts.tp + counts.fn)
    specificity = rate(counts.tn, counts.tn + counts.fp)
    accuracy = rate(counts.tp + counts.tn, counts.total)
    if precision is None or sensitivity is None:
        f_score = None
    elif precision + sensitivity == 0.0:
        f_score = 0.0
    else:
        f_score = 2.0 * precision * sensitivity / (precision + sensitivity)
    if sensitivity is None or specificity is None:
        auc = None
    else:
        auc = 0.5 * (sensitivity + specificity)
    return MetricsReport(counts=counts, precision=precision, sensitivity=sensitivity,
                         specificity=specificity, accuracy=accuracy,
                         f_score=f_score, auc=auc)


def image_contrast(image: np.ndarray, squared: bool = False) -> float:
    """Standard deviation over mean of the image amplitude.

    The image is taken to hold linear power, so amplitude is its square
    root; squared=True scores the power values directly instead.  A single
    bright cell in an otherwise dark n-cell image scores sqrt(n - 1) either
    way; flat images score 0.
    """
    values = np.abs(np.asarray(image, dtype=float))
    if not squared:
        values = np.sqrt(values)
    mean = values.mean()
    if mean == 0.0:
        raise MesimError("image has zero mean amplitude, contrast is undefined")
    return float(values.std() / mean)


CONTRAST_MODES = ("projection", "mean")


def contrast_by_plane(values: np.ndarray, mode: str = "projection",
                      axis_names: tuple = ("x", "y", "z"),
                      squared: bool = False) -> dict:
    """Contrast of the volume seen along each axis, keyed by the remaining
    plane (e.g. collapsing axis 0 of an (x, y, z) volume scores the "y-z"
    plane).

    projection collapses the volume with a maximum before scoring, which is
    how a point target keeps its contrast instead of having it averaged away
    over mostly-empty slices.  mean scores every slice and averages,
    skipping all-zero slices.  squared is passed through to image_contrast.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 3:
        raise MesimError(f"expected a 3-d volume, got shape {values.shape}")
    if mode not in CONTRAST_MODES:
        raise MesimError(f"unknown contrast mode {mode!r}, expected one of {CONTRAST_MODES}")
    out = {}
    for axis in range(3):
        name = "-".join(n for i, n in enumerate(axis_names) if i != axis)
        if mode == "projection":
            out[name] = image_contrast(values.max(axis=axis), squared=squared)
        else:
            scores = [image_contrast(sl, squared=squared)
                      for sl in np.moveaxis(values, axis, 0)
                      if np.abs(sl).mean() > 0.0]
            out[name] = float(np.mean(scores)) if scores else None
    return out


def dynamic_range_db(values: np.ndarray) -> float:
    """Span between the strongest and weakest positive cells, in dB."""
    values = np.asarray(values, dtype=float)
    positive = values[values > 0.0]
    if positive.size == 0:
        raise MesimError("no positive cells, dynamic range is undefined")
    return float(10.0 * np.log10(positive.max() / positive.min()))


def dynamic_range_ratio(values_a, values_b) -> float:
    """dB span of image a over dB span of image b.

    Because both spans live in the dB domain the ratio ignores any overall
    linear scaling of either image.  Errors when b is flat.
    """
    a = getattr(values_a, "power", values_a)
    b = getattr(values_b, "power", values_b)
    span_b = dynamic_range_db(b)
    if span_b == 0.0:
        raise MesimError("reference image is flat, dynamic range ratio is undefined")
    return dynamic_range_db(a) / span_b


def _nearest_index(axis: np.ndarray, coord: np.ndarray):
    """Index of the closest axis entry for each coordinate, plus the
    half-step acceptance distance."""
    if len(axis) == 1:
        return np.zeros(coord.shape, dtype=int), np.inf
    j = np.clip(np.searchsorted(axis, coord), 1, len(axis) - 1)
    pick_left = (coord - axis[j - 1]) <= (axis[j] - coord)
    return np.where(pick_left, j - 1, j), 0.5 * (axis[1] - axis[0])


def occupancy_from_scene(scene: Scene, grid: ImagingGrid) -> np.ndarray:
    """Mark the grid cell nearest each scatterer, skipping points farther
    than half a grid step from any cell center."""
    rng, theta, phi = spherical_coords(scene.positions)
    occ = np.zeros(grid.shape, dtype=bool)
    axes = (np.asarray(grid.range_m, dtype=float),
            np.asarray(grid.azimuth_deg, dtype=float),
            np.asarray(grid.elevation_deg, dtype=float))
    coords = (rng, np.rad2deg(theta), np.rad2deg(phi))
    idx = []
    keep = np.ones(len(scene), dtype=bool)
    for axis, coord in zip(axes, coords):
        j, half = _nearest_index(axis, coord)
        keep &= np.abs(coord - axis[j]) <= half + 1e-12
        idx.append(j)
    occ[idx[0][keep], idx[1][keep], idx[2][keep]] = True
    return occ
