"""Batch pipeline driver.

Four file-chained subcommands: simulate writes a raw cube, image turns a
cube into a power cube plus projections, metrics scores a power cube against
truth, compare tabulates two metric reports.  All outputs are written
atomically and listed in a manifest next to them, keyed by the sha256 of the
config file that produced them.

Exit codes: 0 on success, 2 for configuration problems, 3 for runtime and
I/O failures.
"""

import argparse
import hashlib
import io
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .config import (EgoMotion, ImagingGrid, RadarConfig, derived_params,
                     speed_bounds)
from .errors import (ConfigError, FrameTooShortError, MesimError,
                     SpeedRangeError)
from .imaging import (SCAN_METHODS, PowerCube, load_power_cube,
                      save_power_cube, scan)
from .metrics import (CONTRAST_MODES, contrast_by_plane, confusion,
                      dynamic_range_db, occupancy_from_scene, report,
                      voxelise)
from .rangeproc import WINDOWS, detect_range_bins, range_fft
from .scene import (POINT_CLOUD_FORMATS, Scene, assign_swerling3_amplitudes,
                    box_cloud, load_point_cloud, resample_uniform)
from .simulate import SIM_MODES, add_noise, load_cube, save_cube, simulate_frame
from .snapshots import build_plan, mimo_plan

_SCHEMA = {
    "radar": {"start_freq", "bandwidth", "chirp_duration", "sample_rate",
              "pri", "num_chirps", "num_elev", "spacing", "complex_baseband"},
    "motion": {"vx", "vy", "vz"},
    "scene": {"points", "amplitudes", "file", "format", "boxes",
              "resample", "amplitude_range", "seed"},
    "snapshots": {"count", "start", "samples"},
    "grid": {"azimuth", "elevation", "range_window"},
    "imaging": {"method", "num_sources", "diagonal_loading", "compensate",
                "window", "threshold_db", "baseline"},
    "simulation": {"mode", "range_attenuation", "seed"},
    "noise": {"snr_db", "seed"},
    "metrics": {"threshold_db", "contrast_mode"},
    "output": {"db_window"},
}

BASELINES = ("motion", "mimo-only")


def load_config(path):
    """Parse a TOML or JSON scenario file and reject unknown keys."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    name = str(path)
    try:
        if name.endswith(".json"):
            raw = json.loads(blob.decode("utf-8"))
        elif name.endswith(".toml"):
            raw = tomllib.loads(blob.decode("utf-8"))
        else:
            raise ConfigError(f"config {path} must end in .toml or .json")
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a table of sections")
    for section, body in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"config section {section!r} must be a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
    return raw, blob


def _get(raw, section, key, default=None):
    return raw.get(section, {}).get(key, default)


def _choice(raw, section, key, default, allowed):
    value = _get(raw, section, key, default)
    if value not in allowed:
        raise ConfigError(f"{section}.{key} must be one of {allowed}, got {value!r}")
    return value


def build_radar(raw) -> RadarConfig:
    sec = raw.get("radar")
    if not sec:
        raise ConfigError("radar section is required")
    required = ("start_freq", "bandwidth", "chirp_duration", "sample_rate",
                "pri", "num_chirps", "num_elev")
    for key in required:
        if key not in sec:
            raise ConfigError(f"radar.{key} is required")
    return RadarConfig(
        start_freq=float(sec["start_freq"]),
        bandwidth=float(sec["bandwidth"]),
        chirp_duration=float(sec["chirp_duration"]),
        sample_rate=float(sec["sample_rate"]),
        pri=float(sec["pri"]),
        num_chirps=int(sec["num_chirps"]),
        num_elev=int(sec["num_elev"]),
        spacing=float(sec["spacing"]) if "spacing" in sec else None,
        complex_baseband=bool(sec.get("complex_baseband", False)),
    )


def build_motion(raw) -> EgoMotion:
    sec = raw.get("motion", {})
    return EgoMotion(vx=float(sec.get("vx", 0.0)),
                     vy=float(sec.get("vy", 0.0)),
                     vz=float(sec.get("vz", 0.0)))


def build_scene(raw, base_dir) -> Scene:
    sec = raw.get("scene")
    if not sec:
        raise ConfigError("scene section is required")
    sources = [k for k in ("points", "file", "boxes") if k in sec]
    if len(sources) != 1:
        raise ConfigError("scene needs exactly one of scene.points, scene.file, scene.boxes")
    seed = int(sec.get("seed", 0))
    if "points" in sec:
        positions = np.asarray(sec["points"], dtype=float)
        amps = None
        if "amplitudes" in sec:
            amps = np.asarray(sec["amplitudes"], dtype=complex)
        scene = Scene(positions=positions, amplitudes=amps)
    elif "file" in sec:
        fmt = _choice(raw, "scene", "format", "xyz-text", POINT_CLOUD_FORMATS)
        path = sec["file"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        scene = load_point_cloud(path, fmt)
    else:
        boxes = sec["boxes"]
        if not isinstance(boxes, list) or not boxes:
            raise ConfigError("scene.boxes must be a non-empty list of tables")
        parts = []
        for i, box in enumerate(boxes):
            extra = set(box) - {"center", "size", "count"}
            if extra or "center" not in box or "size" not in box or "count" not in box:
                raise ConfigError(
                    f"scene.boxes[{i}] needs exactly center, size and count")
            parts.append(box_cloud(box["center"], box["size"], int(box["count"]),
                                   seed=seed + i))
        positions = np.vstack([p.positions for p in parts])
        amps = np.concatenate([p.amplitudes for p in parts])
        scene = Scene(positions=positions, amplitudes=amps)
    if "resample" in sec:
        scene = resample_uniform(scene, int(sec["resample"]), seed=seed)
    if "amplitude_range" in sec:
        bounds = sec["amplitude_range"]
        if len(bounds) != 2:
            raise ConfigError("scene.amplitude_range must be [lo, hi]")
        scene = assign_swerling3_amplitudes(scene, float(bounds[0]), float(bounds[1]),
                                            seed=seed + 1)
    return scene


def build_grid(raw, cfg) -> ImagingGrid:
    sec = raw.get("grid", {})

    def axis(key, default):
        value = sec.get(key, default)
        if len(value) != 3:
            raise ConfigError(f"grid.{key} must be [low, high, step] in degrees")
        return tuple(float(v) for v in value)

    window = None
    if "range_window" in sec:
        rw = sec["range_window"]
        if len(rw) != 2:
            raise ConfigError("grid.range_window must be [low, high] in metres")
        window = (float(rw[0]), float(rw[1]))
    return ImagingGrid.regular(cfg, axis("azimuth", (-90.0, 90.0, 1.0)),
                               axis("elevation", (-90.0, 90.0, 1.0)), window)


def _snapshot_count(raw, override):
    value = override if override is not None else _get(raw, "snapshots", "count", "max")
    if value == "max":
        return "max"
    try:
        count = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"snapshots.count must be an integer or \"max\", got {value!r}")
    if count < 0:
        raise ConfigError("snapshots.count must be >= 0")
    return count


def _build_plan(raw, cfg, motion, args):
    baseline = args.baseline if args.baseline else \
        _choice(raw, "imaging", "baseline", "motion", BASELINES)
    start = int(_get(raw, "snapshots", "start", 0))
    samples = _get(raw, "snapshots", "samples")
    samples = int(samples) if samples is not None else None
    try:
        if baseline == "mimo-only":
            return mimo_plan(cfg, start=start, samples=samples), baseline
        count = _snapshot_count(raw, getattr(args, "snapshots", None))
        return build_plan(cfg, motion, start=start, num_extra=count,
                          samples=samples), baseline
    except (SpeedRangeError, FrameTooShortError) as exc:
        raise ConfigError(str(exc)) from exc


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path, data: bytes):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_json(path, obj):
    data = (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")
    _atomic_write(path, data)
    return data


def _write_manifest(out_dir, command, config_blob, raw, seeds, cfg, outputs):
    d = derived_params(cfg)
    lo, hi = speed_bounds(cfg)
    manifest = {
        "command": command,
        "config_sha256": _sha256(config_blob),
        "config": raw,
        "derived": {
            "slope": d.slope,
            "wavelength": d.wavelength,
            "samples_per_chirp": d.samples_per_chirp,
            "range_resolution": d.range_resolution,
            "unambiguous_range": d.unambiguous_range,
            "speed_bounds": [lo, hi],
        },
        "seeds": seeds,
        "outputs": {name: _sha256(blob) for name, blob in outputs.items()},
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def to_pgm(values: np.ndarray, window_db: float) -> bytes:
    """Render a non-negative 2D map as an 8-bit PGM, linear in dB over
    window_db below the peak."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.size == 0:
        raise MesimError(f"PGM export needs a non-empty 2D map, got shape {values.shape}")
    if window_db <= 0:
        raise ConfigError("output.db_window must be positive")
    peak = values.max()
    pixels = np.zeros(values.shape, dtype=np.uint8)
    if peak > 0:
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(np.where(values > 0, values / peak, np.nan))
        level = np.clip((db + window_db) / window_db, 0.0, 1.0)
        pixels = np.where(np.isnan(level), 0, np.round(level * 255.0)).astype(np.uint8)
    rows, cols = values.shape
    header = f"P5\n# dB window {window_db:g}\n{cols} {rows}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def _csv_bytes(values: np.ndarray, header: str) -> bytes:
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(values), delimiter=",", fmt="%.9e",
               header=header, comments="# ")
    return buf.getvalue().encode("ascii")


def run_simulate(args) -> int:
    raw, blob = load_config(args.config)
    cfg = build_radar(raw)
    motion = build_motion(raw)
    scene = build_scene(raw, os.path.dirname(os.path.abspath(args.config)))
    mode = _choice(raw, "simulation", "mode", "geometric", SIM_MODES)
    sim_seed = int(_get(raw, "simulation", "seed", 0))
    noise_seed = int(_get(raw, "noise", "seed", 1))
    if args.seed is not None:
        sim_seed = noise_seed = int(args.seed)
    cube = simulate_frame(
        scene, cfg, motion, seed=sim_seed, mode=mode,
        range_attenuation=bool(_get(raw, "simulation", "range_attenuation", False)))
    snr_db = _get(raw, "noise", "snr_db")
    if snr_db is not None:
        cube = add_noise(cube, float(snr_db), seed=noise_seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "cube.bin")
    tmp = f"{path}.tmp"
    save_cube(cube, tmp)
    os.replace(tmp, path)
    seeds = {"simulation": sim_seed, "scene": int(_get(raw, "scene", "seed", 0))}
    if snr_db is not None:
        seeds["noise"] = noise_seed
    _write_manifest(args.out, "simulate", blob, raw, seeds, cfg,
                    {"cube.bin": _read_bytes(path)})
    ne, ld, bd = cube.samples.shape
    print(f"wrote {path}: {ne} channels x {ld} chirps x {bd} samples, "
          f"{len(scene)} scatterers")
    return 0


_PROJECTIONS = (
    ("range_azimuth", 2, ("range bin", "azimuth deg")),
    ("range_elevation", 1, ("range bin", "elevation deg")),
    ("azimuth_elevation", 0, ("azimuth deg", "elevation deg")),
)


def run_image(args) -> int:
    raw, blob = load_config(args.config)
    cfg = build_radar(raw)
    motion = build_motion(raw)
    cube = load_cube(args.cube, cfg, motion)
    grid = build_grid(raw, cfg)
    window = _choice(raw, "imaging", "window", "hann", WINDOWS)
    spectrum = range_fft(cube, window=window)
    threshold = float(_get(raw, "imaging", "threshold_db", 12.0))
    detections = detect_range_bins(spectrum, threshold)
    in_grid = set(int(b) for b in grid.range_bins)
    detections = [b for b in detections if b in in_grid]
    method = args.method if args.method else \
        _choice(raw, "imaging", "method", "dbf", SCAN_METHODS)
    plan, baseline = _build_plan(raw, cfg, motion, args)
    compensate = bool(_get(raw, "imaging", "compensate", True)) and not args.no_compensation
    os.makedirs(args.out, exist_ok=True)
    outputs = {}
    if not detections:
        print("warning: no range bins above the detection threshold; "
              "writing an empty image", file=sys.stderr)
        image = PowerCube(
            power=np.zeros((0, len(grid.azimuth_deg), len(grid.elevation_deg))),
            azimuth_deg=np.asarray(grid.azimuth_deg, dtype=float),
            elevation_deg=np.asarray(grid.elevation_deg, dtype=float),
            range_bins=np.zeros(0, dtype=int), range_m=np.zeros(0),
            method=method, compensated=compensate, snapshots=plan.count)
    else:
        num_sources = _get(raw, "imaging", "num_sources")
        image = scan(spectrum, plan, motion, grid, detections=detections,
                     method=method,
                     num_sources=int(num_sources) if num_sources is not None else None,
                     diagonal_loading=float(_get(raw, "imaging", "diagonal_loading", 0.0)),
                     compensate=compensate)
    path = os.path.join(args.out, "image.bin")
    tmp = f"{path}.tmp"
    save_power_cube(tmp, image)
    os.replace(tmp, path)
    outputs["image.bin"] = _read_bytes(path)
    if detections:
        db_window = float(_get(raw, "output", "db_window", 40.0))
        for name, axis, labels in _PROJECTIONS:
            flat = image.power.max(axis=axis)
            header = f"max projection, rows: {labels[0]}, cols: {labels[1]}"
            outputs[f"{name}.csv"] = _csv_bytes(flat, header)
            outputs[f"{name}.pgm"] = to_pgm(flat, db_window)
            for ext in ("csv", "pgm"):
                _atomic_write(os.path.join(args.out, f"{name}.{ext}"),
                              outputs[f"{name}.{ext}"])
    _write_manifest(args.out, "image", blob, raw, {}, cfg, outputs)
    print(f"imaged {len(detections)} range bins with {method} "
          f"({baseline} baseline, {plan.count} snapshots, "
          f"compensation {'on' if compensate else 'off'}) -> {path}")
    return 0


def run_metrics(args) -> int:
    raw, blob = load_config(args.config)
    cfg = build_radar(raw)
    image = load_power_cube(args.image)
    if image.shape[0] == 0:
        raise MesimError("image holds no range bins, nothing to score")
    threshold = float(_get(raw, "metrics", "threshold_db", 20.0))
    grid = ImagingGrid(azimuth_deg=np.asarray(image.azimuth_deg),
                       elevation_deg=np.asarray(image.elevation_deg),
                       range_bins=np.asarray(image.range_bins),
                       range_m=np.asarray(image.range_m))
    if args.truth is not None:
        truth_cube = load_power_cube(args.truth)
        same = (truth_cube.shape == image.shape
                and np.array_equal(truth_cube.range_bins, image.range_bins)
                and np.allclose(truth_cube.azimuth_deg, image.azimuth_deg)
                and np.allclose(truth_cube.elevation_deg, image.elevation_deg))
        if not same:
            raise MesimError(
                f"truth grid {truth_cube.shape} does not match image grid {image.shape}")
        truth = voxelise(truth_cube.power, threshold)
    else:
        scene = build_scene(raw, os.path.dirname(os.path.abspath(args.config)))
        truth = occupancy_from_scene(scene, grid)
    predicted = voxelise(image.power, threshold)
    rep = report(confusion(predicted, truth))
    mode = _choice(raw, "metrics", "contrast_mode", "projection", CONTRAST_MODES)
    rep.contrast = contrast_by_plane(image.power, mode=mode,
                                     axis_names=("range", "azimuth", "elevation"))
    payload = rep.as_dict()
    payload["dynamic_range_db"] = dynamic_range_db(image.power)
    payload["threshold_db"] = threshold
    os.makedirs(args.out, exist_ok=True)
    outputs = {}
    outputs["metrics.json"] = _write_json(os.path.join(args.out, "metrics.json"), payload)
    rows = sorted(rep.contrast.items())
    csv = "# plane,contrast\n" + "".join(
        f"{name},{value if value is not None else 'nan'}\n" for name, value in rows)
    outputs["contrast.csv"] = csv.encode("ascii")
    _atomic_write(os.path.join(args.out, "contrast.csv"), outputs["contrast.csv"])
    _write_manifest(args.out, "metrics", blob, raw,
                    {"scene": int(_get(raw, "scene", "seed", 0))}, cfg, outputs)
    shown = {k: v for k, v in payload.items() if not isinstance(v, dict)}
    print(json.dumps(shown, indent=2, sort_keys=True))
    return 0


_COMPARE_KEYS = ("accuracy", "precision", "sensitivity", "specificity",
                 "auc", "f_score", "dynamic_range_db")


def run_compare(args) -> int:
    reports = []
    for path in (args.report_a, args.report_b):
        with open(path, "r", encoding="utf-8") as fh:
            reports.append(json.load(fh))
    a, b = reports
    names = list(_COMPARE_KEYS)
    for rep in (a, b):
        for plane in sorted(rep.get("contrast", {})):
            key = f"contrast.{plane}"
            if key not in names:
                names.append(key)

    def lookup(rep, name):
        if name.startswith("contrast."):
            return rep.get("contrast", {}).get(name.split(".", 1)[1])
        return rep.get(name)

    rows = []
    for name in names:
        va, vb = lookup(a, name), lookup(b, name)
        ratio = va / vb if isinstance(va, (int, float)) and isinstance(vb, (int, float)) \
            and vb != 0 else None
        rows.append((name, va, vb, ratio))

    def fmt(v):
        return f"{v:.6g}" if isinstance(v, (int, float)) else "n/a"

    width = max(len(r[0]) for r in rows)
    lines = [f"{'metric'.ljust(width)}  {'a':>12}  {'b':>12}  {'a/b':>12}"]
    for name, va, vb, ratio in rows:
        lines.append(f"{name.ljust(width)}  {fmt(va):>12}  {fmt(vb):>12}  {fmt(ratio):>12}")
    table = "\n".join(lines)
    print(table)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv = "# metric,a,b,ratio\n" + "".join(
            f"{n},{fmt(va)},{fmt(vb)},{fmt(r)}\n" for n, va, vb, r in rows)
        _atomic_write(os.path.join(args.out, "compare.csv"), csv.encode("ascii"))
        _write_json(os.path.join(args.out, "compare.json"),
                    {n: {"a": va, "b": vb, "ratio": r} for n, va, vb, r in rows})
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mesim",
        description="Simulate and image a forward-moving side-looking radar "
                    "whose azimuth aperture is synthesized from platform motion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a raw data cube from a scenario config")
    p.add_argument("--config", required=True, help="scenario file (.toml or .json)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the simulation and noise seeds")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("image", help="turn a raw cube into a 3D power image")
    p.add_argument("cube", help="raw cube file from the simulate step")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=SCAN_METHODS, default=None,
                   help="override imaging.method")
    p.add_argument("--snapshots", default=None, metavar="N|max",
                   help="override snapshots.count (extended snapshot count)")
    p.add_argument("--no-compensation", action="store_true",
                   help="steer with the ideal half-spacing model only")
    p.add_argument("--baseline", choices=["mimo-only"], default=None,
                   help="image with the physical array alone")
    p.set_defaults(func=run_image)

    p = sub.add_parser("metrics", help="score a power image against ground truth")
    p.add_argument("image", help="power cube file from the image step")
    p.add_argument("truth", nargs="?", default=None,
                   help="optional power cube whose voxelisation is the truth; "
                        "defaults to the config scene")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_metrics)

    p = sub.add_parser("compare", help="tabulate two metric reports side by side")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--out", default=None, help="also write compare.csv/json here")
    p.set_defaults(func=run_compare)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (MesimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
