"""Voxelisation, confusion metrics, contrast and dynamic range."""

import numpy as np
import pytest

from helpers import target_position
from mesim import (ConfusionCounts, ImagingGrid, MesimError, RadarConfig,
                   Scene, confusion, contrast_by_plane, dynamic_range_db,
                   dynamic_range_ratio, image_contrast, occupancy_from_scene,
                   report, voxelise)


def test_voxelise_keeps_only_the_peak():
    values = np.full((2, 5, 5), 1.0)
    values[1, 2, 3] = 1000.0  # 30 dB over the unit floor
    mask = voxelise(values, threshold_db=20.0)
    assert mask.dtype == bool
    assert mask.sum() == 1
    assert mask[1, 2, 3]


def test_voxelise_uniform_cube_is_all_false():
    assert not voxelise(np.full((3, 4, 4), 2.5), threshold_db=20.0).any()


def test_voxelise_low_threshold_keeps_positive_cells():
    values = np.zeros((1, 4, 4))
    values[0, :2] = np.linspace(1.0, 2.0, 8).reshape(2, 4)
    mask = voxelise(values, threshold_db=-1000.0)
    assert np.array_equal(mask, values > 0.0)


def test_voxelise_rejects_silent_cube():
    with pytest.raises(MesimError):
        voxelise(np.zeros((2, 2, 2)), threshold_db=20.0)


def test_confusion_identical_and_disjoint():
    truth = np.zeros((4, 4), dtype=bool)
    truth[1, 1] = truth[2, 3] = True
    counts = confusion(truth, truth)
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (2, 0, 0, 14)
    rep = report(counts)
    assert rep.accuracy == 1.0
    assert rep.f_score == 1.0

    other = np.zeros((4, 4), dtype=bool)
    other[0, 0] = True
    rep = report(confusion(other, truth))
    assert rep.f_score == 0.0


def test_confusion_hand_case():
    predicted = np.array([[True, True], [False, False]])
    truth = np.array([[True, False], [True, False]])
    counts = confusion(predicted, truth)
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (1, 1, 1, 1)
    rep = report(counts)
    for value in (rep.accuracy, rep.precision, rep.sensitivity,
                  rep.specificity, rep.auc, rep.f_score):
        assert abs(value - 0.5) < 1e-12


def test_confusion_shape_mismatch():
    with pytest.raises(MesimError):
        confusion(np.zeros((2, 2), dtype=bool), np.zeros((2, 3), dtype=bool))


def test_report_undefined_sentinels():
    rep = report(ConfusionCounts(tp=0, fp=0, fn=3, tn=5))
    assert rep.precision is None
    assert rep.f_score is None
    assert rep.sensitivity == 0.0
    empty = report(ConfusionCounts(tp=0, fp=0, fn=0, tn=8))
    assert empty.precision is None and empty.sensitivity is None
    assert empty.accuracy == 1.0


def test_auc_identity():
    counts = ConfusionCounts(tp=3, fp=2, fn=4, tn=7)
    rep = report(counts)
    assert abs(rep.auc - 0.5 * (rep.sensitivity + rep.specificity)) < 1e-15
    # symmetric case: equal positives and negatives make auc equal accuracy
    sym = report(ConfusionCounts(tp=3, fp=2, fn=2, tn=3))
    assert abs(sym.auc - sym.accuracy) < 1e-15


def test_confusion_permutation_invariance():
    rng = np.random.default_rng(12)
    predicted = rng.uniform(size=60) > 0.6
    truth = rng.uniform(size=60) > 0.7
    base = report(confusion(predicted, truth))
    perm = rng.permutation(60)
    shuffled = report(confusion(predicted[perm], truth[perm]))
    assert base.as_dict() == shuffled.as_dict()


def test_contrast_constant_slice_is_zero():
    assert abs(image_contrast(np.full((6, 6), 3.0))) < 1e-12


def test_contrast_one_hot_closed_form():
    for n, shape in ((16, (4, 4)), (36, (6, 6))):
        one_hot = np.zeros(shape)
        one_hot[0, 0] = 7.0
        # power -> amplitude scoring: sqrt leaves one-hot structure intact
        assert abs(image_contrast(one_hot) - np.sqrt(n - 1)) < 1e-9
        assert abs(image_contrast(one_hot, squared=True) - np.sqrt(n - 1)) < 1e-9


def test_contrast_scale_invariance():
    rng = np.random.default_rng(3)
    img = rng.uniform(0.1, 2.0, size=(8, 8))
    a = image_contrast(img)
    b = image_contrast(173.5 * img)
    assert abs(a - b) < 1e-12
    with pytest.raises(MesimError):
        image_contrast(np.zeros((4, 4)))


def test_contrast_by_plane_collapses_each_axis():
    rng = np.random.default_rng(4)
    values = rng.uniform(0.0, 1.0, size=(5, 7, 3))
    out = contrast_by_plane(values, mode="projection",
                            axis_names=("range", "azimuth", "elevation"))
    assert set(out) == {"azimuth-elevation", "range-elevation", "range-azimuth"}
    expected = image_contrast(values.max(axis=2))
    assert abs(out["range-azimuth"] - expected) < 1e-12


def test_contrast_by_plane_mean_mode_skips_empty_slices():
    values = np.zeros((3, 4, 4))
    values[1] = np.eye(4) + 0.1
    out = contrast_by_plane(values, mode="mean",
                            axis_names=("range", "azimuth", "elevation"))
    # collapsing azimuth/elevation averages only the one non-empty range slice
    assert abs(out["azimuth-elevation"] - image_contrast(values[1])) < 1e-12
    silent = np.zeros((2, 2, 2))
    out = contrast_by_plane(silent, mode="mean",
                            axis_names=("range", "azimuth", "elevation"))
    assert out["azimuth-elevation"] is None


def test_contrast_by_plane_validation():
    with pytest.raises(MesimError):
        contrast_by_plane(np.zeros((2, 2)), mode="projection")
    with pytest.raises(MesimError):
        contrast_by_plane(np.zeros((2, 2, 2)), mode="median")


def test_dynamic_range_identities():
    rng = np.random.default_rng(5)
    values = rng.uniform(0.5, 4.0, size=(3, 5, 5))
    assert abs(dynamic_range_ratio(values, values) - 1.0) < 1e-12
    # a global linear gain shifts both ends of the dB span equally
    assert abs(dynamic_range_ratio(10.0 * values, values) - 1.0) < 1e-12
    span = dynamic_range_db(values)
    assert abs(span - 10.0 * np.log10(values.max() / values.min())) < 1e-12
    with pytest.raises(MesimError):
        dynamic_range_ratio(values, np.full((2, 2), 3.0))


def test_occupancy_from_scene_marks_target_cells():
    cfg = RadarConfig(start_freq=77e9, bandwidth=1e9, chirp_duration=16e-6,
                      sample_rate=32e6, pri=16e-6, num_chirps=64, num_elev=4)
    grid = ImagingGrid.regular(cfg, azimuth=(-10.0, 10.0, 1.0),
                               elevation=(-5.0, 5.0, 1.0),
                               range_window=(9.0, 11.0))
    pos = np.vstack([target_position(10.05, 4.0, 2.0),
                     target_position(10.05, -7.0, -3.0)])
    scene = Scene(positions=pos, amplitudes=np.ones(2, dtype=complex))
    occ = occupancy_from_scene(scene, grid)
    assert occ.shape == grid.shape
    assert occ.sum() == 2
    r_idx = int(np.argmin(np.abs(grid.range_m - 10.05)))
    assert occ[r_idx, list(grid.azimuth_deg).index(4.0),
               list(grid.elevation_deg).index(2.0)]
    assert occ[r_idx, list(grid.azimuth_deg).index(-7.0),
               list(grid.elevation_deg).index(-3.0)]


def test_occupancy_ignores_points_off_grid():
    cfg = RadarConfig(start_freq=77e9, bandwidth=1e9, chirp_duration=16e-6,
                      sample_rate=32e6, pri=16e-6, num_chirps=64, num_elev=4)
    grid = ImagingGrid.regular(cfg, azimuth=(-10.0, 10.0, 1.0),
                               elevation=(-5.0, 5.0, 1.0),
                               range_window=(9.0, 11.0))
    pos = np.vstack([target_position(10.0, 40.0, 0.0),   # azimuth off grid
                     target_position(18.0, 0.0, 0.0)])   # range off grid
    scene = Scene(positions=pos, amplitudes=np.ones(2, dtype=complex))
    assert occupancy_from_scene(scene, grid).sum() == 0
