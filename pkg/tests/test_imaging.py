"""Covariance, beamformers, the angular scan and cartesian projection."""

import dataclasses

import numpy as np
import pytest

from helpers import point_scene, target_position
from mesim import (EgoMotion, GeometryError, ImagingGrid, MesimError,
                   RadarConfig, Scene, add_noise, build_plan, dbf_power,
                   dbf_weight, extract_slice, form_tensor, measure_snr,
                   mimo_plan, project_to_cartesian, range_fft,
                   sample_covariance, scan, simulate_frame, stack,
                   steering_vector)
from mesim.imaging import SNR_CAP_DB, PowerCube, load_power_cube, save_power_cube


def _random_stack(rows, cols, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def test_covariance_rank_one_for_single_column():
    x = _random_stack(6, 1, seed=3)
    r = sample_covariance(x)
    assert np.allclose(r, x @ x.conj().T, atol=1e-14)
    s = np.linalg.svd(r, compute_uv=False)
    assert s[1] < 1e-12 * s[0]


def test_covariance_hermitian_psd():
    for seed in range(20):
        x = _random_stack(8, 5, seed=seed)
        r = sample_covariance(x)
        assert np.max(np.abs(r - r.conj().T)) < 1e-10
        w = np.linalg.eigvalsh(r)
        assert w.min() >= -1e-8 * np.trace(r).real


def test_covariance_of_white_noise_is_near_identity():
    x = _random_stack(8, 10000, seed=1) / np.sqrt(2.0)
    r = sample_covariance(x)
    err = np.linalg.norm(r - np.eye(8)) / np.linalg.norm(np.eye(8))
    assert err < 0.05


def test_covariance_diagonal_loading():
    x = _random_stack(6, 4, seed=2)
    bare = sample_covariance(x)
    loaded = sample_covariance(x, diagonal_loading=0.1)
    bump = 0.1 * np.trace(bare).real / 6.0
    assert np.allclose(loaded, bare + bump * np.eye(6), atol=1e-12)


def test_covariance_input_validation():
    with pytest.raises(MesimError):
        sample_covariance(np.zeros(5, dtype=complex))
    with pytest.raises(MesimError):
        sample_covariance(np.zeros((5, 0), dtype=complex))
    with pytest.raises(MesimError):
        sample_covariance(_random_stack(4, 4), diagonal_loading=-1.0)


def test_dbf_power_identities():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    w = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    assert abs(dbf_power(np.eye(7), w) - 1.0) < 1e-12
    r = np.outer(x, x.conj())
    matched = dbf_power(r, x)
    assert abs(matched - np.linalg.norm(x) ** 2) < 1e-9
    # any vector orthogonal to x is blind to it
    perp = np.zeros(7, dtype=complex)
    perp[0], perp[1] = x[1].conj(), -x[0].conj()
    assert abs(np.vdot(x, perp)) < 1e-12
    assert dbf_power(r, perp) < 1e-12 * matched
    with pytest.raises(MesimError):
        dbf_power(np.eye(6), w)


def _two_target_setup():
    cfg = RadarConfig(start_freq=77e9, bandwidth=1e9, chirp_duration=16e-6,
                      sample_rate=16e6, pri=16e-6, num_chirps=128, num_elev=4)
    motion = EgoMotion(vy=15.0)
    a = point_scene(10.05, 6.0, 2.0)
    b = point_scene(10.05, -8.0, -4.0)
    scene = Scene(positions=np.vstack([a.positions, b.positions]),
                  amplitudes=np.array([1.0 + 0j, 0.8 + 0j]))
    cube = add_noise(simulate_frame(scene, cfg, motion), snr_db=10.0, seed=9)
    spec = range_fft(cube)
    plan = build_plan(cfg, motion, num_extra=15, samples=4)
    grid = ImagingGrid.regular(cfg, azimuth=(-14.0, 12.0, 2.0),
                               elevation=(-8.0, 8.0, 2.0),
                               range_window=(9.9, 10.2))
    return cfg, motion, spec, plan, grid


def test_scan_matches_direct_evaluation_per_method():
    # the table-driven scan must reproduce a cell-by-cell evaluation of the
    # covariance quadratic forms exactly
    cfg, motion, spec, plan, grid = _two_target_setup()
    loading = 1e-2
    num_sources = 2
    bins = [int(b) for b in grid.range_bins]
    naive = {m: np.zeros(grid.shape) for m in ("dbf", "mvdr", "music")}
    for k, rbin in enumerate(bins):
        x = stack(form_tensor(extract_slice(spec, rbin), plan))
        m_rows = x.shape[0]
        r = sample_covariance(x, diagonal_loading=loading)
        r_inv = np.linalg.inv(r)
        vals, vecs = np.linalg.eigh(r)
        noise_sub = vecs[:, :m_rows - num_sources]
        for i, th in enumerate(np.deg2rad(grid.azimuth_deg)):
            for j, ph in enumerate(np.deg2rad(grid.elevation_deg)):
                sv = steering_vector(th, ph, plan, motion, cfg)
                a = sv.values
                naive["dbf"][k, i, j] = dbf_power(r, dbf_weight(sv))
                # unit-norm weight a / sqrt(M), hence the M in the numerator
                naive["mvdr"][k, i, j] = m_rows / np.real(a.conj() @ r_inv @ a)
                proj = noise_sub.conj().T @ a
                naive["music"][k, i, j] = 1.0 / np.real(proj.conj() @ proj)
    for method in ("dbf", "mvdr", "music"):
        cube = scan(spec, plan, motion, grid, method=method,
                    num_sources=num_sources, diagonal_loading=loading)
        scale = np.max(naive[method])
        assert np.max(np.abs(cube.power - naive[method])) < 1e-9 * scale, method
        assert cube.method == method
        assert cube.snapshots == plan.count


def test_scan_metadata_and_zero_fill():
    cfg, motion, spec, plan, grid = _two_target_setup()
    detected = [int(grid.range_bins[1])]
    cube = scan(spec, plan, motion, grid, detections=detected)
    assert cube.shape == grid.shape
    assert np.array_equal(cube.range_bins, grid.range_bins)
    row = list(grid.range_bins).index(detected[0])
    others = [i for i in range(len(grid.range_bins)) if i != row]
    assert np.all(cube.power[others] == 0.0)
    assert np.all(cube.power[row] > 0.0)
    assert cube.compensated


def test_scan_is_phase_blind():
    cfg, motion, spec, plan, grid = _two_target_setup()
    rotated = dataclasses.replace(spec, bins=spec.bins * np.exp(1j * 1.234))
    a = scan(spec, plan, motion, grid)
    b = scan(rotated, plan, motion, grid)
    assert np.max(np.abs(a.power - b.power)) < 1e-9 * np.max(a.power)


def test_scan_argument_validation():
    cfg, motion, spec, plan, grid = _two_target_setup()
    with pytest.raises(MesimError, match="outside the imaging grid"):
        scan(spec, plan, motion, grid, detections=[0])
    with pytest.raises(MesimError):
        scan(spec, plan, motion, grid, method="capon")
    m = plan.count * cfg.num_elev
    for bad_k in (None, 0, m):
        with pytest.raises(MesimError):
            scan(spec, plan, motion, grid, method="music", num_sources=bad_k)


def test_scan_mvdr_needs_loading_when_sample_starved():
    cfg, motion, spec, plan, grid = _two_target_setup()
    # 64 rows from only 4 slow-time samples: singular without loading
    with pytest.raises(MesimError, match="diagonal_loading"):
        scan(spec, plan, motion, grid, method="mvdr")
    cube = scan(spec, plan, motion, grid, method="mvdr", diagonal_loading=1e-2)
    assert np.all(np.isfinite(cube.power))


def test_single_target_argmax_convergence_across_methods():
    # the adaptive and subspace scans must agree with conventional
    # beamforming about where a lone target sits
    cfg = RadarConfig(start_freq=77e9, bandwidth=1e9, chirp_duration=16e-6,
                      sample_rate=16e6, pri=16e-6, num_chirps=128, num_elev=4)
    motion = EgoMotion(vy=15.0)
    th_deg, ph_deg = 5.0, -6.0
    cube_raw = add_noise(simulate_frame(point_scene(9.0, th_deg, ph_deg),
                                        cfg, motion, mode="literal"),
                         snr_db=30.0, seed=5)
    spec = range_fft(cube_raw)
    plan = build_plan(cfg, motion, num_extra=15, samples=4)
    grid = ImagingGrid.regular(cfg, azimuth=(-20.0, 20.0, 1.0),
                               elevation=(-20.0, 20.0, 1.0),
                               range_window=(8.9, 9.2))
    cells = {}
    for method, kwargs in (("dbf", {}),
                           ("mvdr", {"diagonal_loading": 1e-3}),
                           ("music", {"num_sources": 1})):
        cube = scan(spec, plan, motion, grid, method=method, **kwargs)
        cells[method] = np.unravel_index(np.argmax(cube.power), cube.shape)
    assert cells["mvdr"] == cells["dbf"]
    assert cells["music"] == cells["dbf"]
    _, ti, pi = cells["dbf"]
    assert grid.azimuth_deg[ti] == th_deg
    assert grid.elevation_deg[pi] == ph_deg


def test_azimuth_resolution_limit():
    # two targets split by 1.2x the aperture Rayleigh width give two maxima,
    # at 0.4x they merge into one
    cfg = RadarConfig(start_freq=77e9, bandwidth=1e9, chirp_duration=16e-6,
                      sample_rate=16e6, pri=16e-6, num_chirps=128, num_elev=4)
    vy = cfg.spacing / (2.0 * 4 * cfg.pri)
    motion = EgoMotion(vy=vy)
    plan = build_plan(cfg, motion, num_extra=15, samples=4)
    m_az = plan.count
    limit_deg = np.rad2deg(cfg.wavelength / (m_az * cfg.spacing))
    grid = ImagingGrid.regular(cfg, azimuth=(-10.0, 10.0, 0.25),
                               elevation=(0.0, 0.0, 1.0),
                               range_window=(14.0, 16.0))

    def peak_count(sep_deg):
        half = 0.5 * sep_deg
        a = point_scene(15.0, half, 0.0)
        b = point_scene(15.0, -half, 0.0)
        scene = Scene(positions=np.vstack([a.positions, b.positions]),
                      amplitudes=np.array([1.0 + 0j, 1.0 + 0j]))
        spec = range_fft(simulate_frame(scene, cfg, motion, mode="literal"))
        cube = scan(spec, plan, motion, grid)
        prof = cube.power.max(axis=(0, 2))
        interior = (prof[1:-1] > prof[:-2]) & (prof[1:-1] > prof[2:])
        peaks = np.flatnonzero(interior) + 1
        peaks = peaks[prof[peaks] > 0.25 * prof.max()]
        return len(peaks)

    assert peak_count(1.2 * limit_deg) == 2
    assert peak_count(0.4 * limit_deg) == 1


def test_measure_snr_cap_and_errors():
    power = np.zeros((3, 11, 9))
    power[1, 5, 4] = 2.0
    cube = PowerCube(power=power, azimuth_deg=np.arange(-5.0, 6.0),
                     elevation_deg=np.arange(-4.0, 5.0),
                     range_bins=np.array([10, 11, 12]),
                     range_m=np.array([1.5, 1.65, 1.8]), method="dbf")
    assert measure_snr(cube, (1, 5, 4)) == SNR_CAP_DB
    with pytest.raises(MesimError):
        measure_snr(cube, (5, 5, 4))
    with pytest.raises(MesimError):
        measure_snr(cube, (1, 5, 4), noise_mask=np.zeros((2, 2), dtype=bool))
    with pytest.raises(MesimError):
        measure_snr(cube, (1, 5, 4), noise_mask=np.zeros((3, 11, 9), dtype=bool))


def test_measure_snr_with_explicit_noise_region():
    power = np.full((1, 7, 7), 0.5)
    power[0, 3, 3] = 50.0
    cube = PowerCube(power=power, azimuth_deg=np.arange(-3.0, 4.0),
                     elevation_deg=np.arange(-3.0, 4.0),
                     range_bins=np.array([4]), range_m=np.array([0.6]),
                     method="dbf")
    mask = np.ones((1, 7, 7), dtype=bool)
    mask[0, 2:5, 2:5] = False
    expected = 10.0 * np.log10(50.0 / 0.5)
    assert abs(measure_snr(cube, (0, 3, 3), noise_mask=mask) - expected) < 1e-12


def test_projection_single_cell():
    cube = PowerCube(power=np.array([[[5.0]]]),
                     azimuth_deg=np.array([30.0]),
                     elevation_deg=np.array([10.0]),
                     range_bins=np.array([67]),
                     range_m=np.array([10.0]), method="dbf")
    vol = project_to_cartesian(cube, voxel_size=0.5)
    occupied = np.argwhere(vol.values > 0.0)
    assert len(occupied) == 1
    assert vol.values.sum() == 5.0
    center = np.array([vol.centers(ax)[occupied[0][ax]] for ax in range(3)])
    assert np.all(np.abs(center - target_position(10.0, 30.0, 10.0)) <= 0.25)


def test_projection_empty_cube():
    cube = PowerCube(power=np.zeros((2, 3, 3)),
                     azimuth_deg=np.array([-1.0, 0.0, 1.0]),
                     elevation_deg=np.array([-1.0, 0.0, 1.0]),
                     range_bins=np.array([10, 11]),
                     range_m=np.array([1.5, 1.65]), method="dbf")
    vol = project_to_cartesian(cube, voxel_size=0.1)
    assert np.all(vol.values == 0.0)


def test_projection_conserves_energy():
    rng = np.random.default_rng(8)
    power = rng.uniform(0.0, 1.0, size=(4, 21, 11))
    cube = PowerCube(power=power,
                     azimuth_deg=np.linspace(-20.0, 20.0, 21),
                     elevation_deg=np.linspace(-10.0, 10.0, 11),
                     range_bins=np.arange(60, 64),
                     range_m=np.arange(60, 64) * 0.15, method="dbf")
    for method in ("nearest", "trilinear"):
        vol = project_to_cartesian(cube, voxel_size=0.2, method=method)
        assert abs(vol.values.sum() / power.sum() - 1.0) < 0.05


def test_projection_jacobian_density():
    # a uniform polar cube crowds voxels near the sensor: per-voxel power
    # in a shell at range r falls off like 1/r^2
    nbins = np.arange(100, 201)
    cube = PowerCube(power=np.ones((101, 121, 41)),
                     azimuth_deg=np.linspace(-30.0, 30.0, 121),
                     elevation_deg=np.linspace(-10.0, 10.0, 41),
                     range_bins=nbins, range_m=nbins * 0.1, method="dbf")
    vol = project_to_cartesian(cube, voxel_size=0.5)
    assert vol.values.sum() == cube.power.size  # every unit cell lands once

    def probe(range_m):
        pos = target_position(range_m, 0.0, 0.0)
        idx = [int(np.floor((pos[ax] - vol.origin[ax]) / 0.5)) for ax in range(3)]
        block = vol.values[idx[0] - 1:idx[0] + 2,
                           idx[1] - 1:idx[1] + 2,
                           idx[2] - 1:idx[2] + 2]
        return block.mean()

    ratio = probe(12.0) / probe(18.0)
    assert abs(ratio - (18.0 / 12.0) ** 2) < 0.3 * (18.0 / 12.0) ** 2


def test_projection_argument_validation():
    cube = PowerCube(power=np.ones((1, 1, 1)),
                     azimuth_deg=np.array([0.0]),
                     elevation_deg=np.array([0.0]),
                     range_bins=np.array([10]),
                     range_m=np.array([1.5]), method="dbf")
    with pytest.raises(MesimError):
        project_to_cartesian(cube, voxel_size=0.0)
    with pytest.raises(MesimError):
        project_to_cartesian(cube, voxel_size=0.5, method="cubic")
    big = PowerCube(power=np.ones((2, 2, 1)),
                    azimuth_deg=np.array([0.0, 45.0]),
                    elevation_deg=np.array([0.0]),
                    range_bins=np.array([1, 2000000]),
                    range_m=np.array([0.15, 300000.0]), method="dbf")
    with pytest.raises(GeometryError):
        project_to_cartesian(big, voxel_size=0.01)


def test_power_cube_file_roundtrip(tmp_path):
    cfg, motion, spec, plan, grid = _two_target_setup()
    cube = scan(spec, plan, motion, grid)
    path = tmp_path / "image.bin"
    save_power_cube(path, cube)
    back = load_power_cube(path)
    assert np.allclose(back.power, cube.power.astype(np.float32), rtol=0.0, atol=0.0)
    assert np.array_equal(back.range_bins, cube.range_bins)
    assert np.allclose(back.range_m, cube.range_m)
    assert np.allclose(back.azimuth_deg, cube.azimuth_deg)
    assert back.method == cube.method
    assert back.snapshots == cube.snapshots
    assert back.compensated == cube.compensated


def test_power_cube_file_corruption(tmp_path):
    cfg, motion, spec, plan, grid = _two_target_setup()
    cube = scan(spec, plan, motion, grid)
    path = tmp_path / "image.bin"
    save_power_cube(path, cube)
    data = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"BADMAGIC" + data[8:])
    with pytest.raises(MesimError):
        load_power_cube(tmp_path / "magic.bin")
    (tmp_path / "short.bin").write_bytes(data[:60])
    with pytest.raises(MesimError):
        load_power_cube(tmp_path / "short.bin")
