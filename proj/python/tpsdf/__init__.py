"""Three-pole signed distance fields: exact fields, null-aware marching cubes,
coordinate networks and reconstruction metrics."""

from ._core import (
    FieldError,
    FormatError,
    MeshError,
    MetricError,
    TrainingError,
    __version__,
    chamfer_l2,
    compute_field,
    emd,
    fit,
    fixture,
    fscore,
    labels,
    load_obj,
    predict,
    reconstruct,
    save_obj,
    surface_sample,
    topology,
)

__all__ = [
    "FieldError",
    "FormatError",
    "MeshError",
    "MetricError",
    "TrainingError",
    "__version__",
    "chamfer_l2",
    "compute_field",
    "emd",
    "fit",
    "fixture",
    "fscore",
    "labels",
    "load_obj",
    "predict",
    "reconstruct",
    "save_obj",
    "surface_sample",
    "topology",
]
