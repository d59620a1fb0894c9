"""Video object segmentation evaluation and propagation-policy toolkit."""

from .masks import VideoSequence, boundary_pixels, decode_rle, dilate, encode_rle, extract_object
from .metrics import (
    MetricConfig,
    SequenceReport,
    adaptive_boundary_accuracy,
    boundary_accuracy,
    dataset_aggregate,
    default_tolerance,
    evaluate_sequence,
    region_similarity,
    sequence_scores,
)

__version__ = "0.1.0"

__all__ = [
    "MetricConfig",
    "SequenceReport",
    "VideoSequence",
    "adaptive_boundary_accuracy",
    "boundary_accuracy",
    "boundary_pixels",
    "dataset_aggregate",
    "decode_rle",
    "default_tolerance",
    "dilate",
    "encode_rle",
    "evaluate_sequence",
    "extract_object",
    "region_similarity",
    "sequence_scores",
]
