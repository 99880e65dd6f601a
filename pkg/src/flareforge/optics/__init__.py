"""Ray-transfer-matrix lens model and second-order ghost geometry."""

from .ghosts import (
    DEFAULT_PARAXIAL_CAP,
    DEFAULT_WAVELENGTHS_NM,
    GhostDescriptor,
    PathFactor,
    all_ghosts,
    direct_path,
    direct_system_matrix,
    entrance_pupil_radius,
    enumerate_ghosts,
    focal_scale_for_fov,
    ghost_geometry,
    ghost_path,
    ghost_system_matrix,
    interface_reflectance,
    path_matrix,
)
from .lens import (
    LensInterface,
    LensPrescription,
    default_prescription,
    format_prescription,
    load_prescription,
    parse_prescription,
    simple_prescription,
)
from .matrices import (
    RayState,
    RayTransferMatrix,
    compose,
    is_flat,
    reflection_matrix,
    refraction_matrix,
    trace_ray,
    translation_matrix,
)
