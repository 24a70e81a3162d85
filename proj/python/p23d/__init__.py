from p23d_native import (
    DataError,
    NumericError,
    UsageError,
    chamfer,
    downsample_mask,
    fscore,
    generate,
    grid_iou,
    load_points,
    load_voxg,
    sample_surface,
    save_voxg,
    visible_points,
    voxel_centers,
    voxelize,
)

__all__ = [
    "DataError",
    "NumericError",
    "UsageError",
    "chamfer",
    "downsample_mask",
    "fscore",
    "generate",
    "grid_iou",
    "load_points",
    "load_voxg",
    "sample_surface",
    "save_voxg",
    "visible_points",
    "voxel_centers",
    "voxelize",
]
