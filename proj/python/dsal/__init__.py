"""Driving-scene salient object detection: numpy bindings over the C++ core.

The heavy lifting (training, dataset construction) runs through the `dsal`
command-line tool; this package exposes the main operations for scripting:
the attention map, boundary/interior ground-truth derivation, fixation
densities and object scores, the four evaluation metrics, and trained-model
inference.
"""

from ._core import (
    DataError,
    DivergenceError,
    Model,
    attention_map,
    bce_loss,
    boundary_band_width,
    channel_softmax_gap,
    default_density_sigma,
    derive_boundary_interior,
    evaluate_dirs,
    f_beta,
    fixation_density,
    mae,
    object_saliency,
    s_measure,
    spatial_softmax,
    weighted_f_beta,
)

__all__ = [
    "DataError",
    "DivergenceError",
    "Model",
    "attention_map",
    "bce_loss",
    "boundary_band_width",
    "channel_softmax_gap",
    "default_density_sigma",
    "derive_boundary_interior",
    "evaluate_dirs",
    "f_beta",
    "fixation_density",
    "mae",
    "object_saliency",
    "s_measure",
    "spatial_softmax",
    "weighted_f_beta",
]
