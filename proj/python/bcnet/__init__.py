"""Bilayer occlusion-aware mask head: synthetic data, training, evaluation."""

from ._bcnet import (
    DimensionError,
    Error,
    FormatError,
    GenerationError,
    Model,
    NumericError,
    Sample,
    SamplingError,
    UsageError,
    average_precision,
    boundary_from_mask,
    dataset_checksum,
    default_train_config,
    generate,
    generate_to,
    load_dataset,
    lr_at,
    mask_iou,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
