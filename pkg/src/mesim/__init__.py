"""Simulation and 3D imaging for a side-looking radar with a 1D elevation
array whose azimuth aperture is synthesized from forward platform motion."""

from .config import (DerivedParams, EgoMotion, ImagingGrid, RadarConfig,
                     SpeedCheck, derived_params, speed_bounds, validate_speed)
from .constants import DECHIRP_SIGN, SPEED_OF_LIGHT
from .errors import (ConfigError, EmptySceneError, FrameTooShortError,
                     GeometryError, MalformedInputError, MesimError,
                     SpeedRangeError, UndefinedSnrError)
from .imaging import (PowerCube, dbf_power, load_power_cube, measure_snr,
                      project_to_cartesian, sample_covariance,
                      save_power_cube, scan)
from .metrics import (ConfusionCounts, MetricsReport, confusion,
                      contrast_by_plane, dynamic_range_db,
                      dynamic_range_ratio, image_contrast,
                      occupancy_from_scene, report, voxelise)
from .rangeproc import RangeSpectrum, detect_range_bins, extract_slice, range_fft
from .scene import (Scene, assign_swerling3_amplitudes, box_cloud,
                    load_point_cloud, resample_uniform, spherical_coords)
from .simulate import RawDataCube, add_noise, load_cube, save_cube, simulate_frame
from .snapshots import (SnapshotPlan, SnapshotTensor, build_plan,
                        compute_snapshot_interval, form_tensor, mimo_plan,
                        stack, unstack)
from .steering import (SteeringVector, azimuth_step_cycles,
                       compensation_phase, compensation_table, dbf_weight,
                       elevation_step_cycles, radial_speed, steering_vector)

__version__ = "0.1.0"
