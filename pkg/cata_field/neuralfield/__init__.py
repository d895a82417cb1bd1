"""Neural field module: encodings, radiance and warping MLPs, exact gradients."""

from .encoding import EncodingConfig, encoded_dim, positional_encode, positional_encode_backward
from .field import (
    FieldConfig,
    FieldParams,
    FieldTape,
    SampleBatch,
    check_finite,
    eval_radiance,
    eval_warp,
    evaluation_counts,
    forward_backward,
    param_group,
    query_field,
    query_field_backward,
    warp_jacobian,
)

__all__ = [
    "EncodingConfig",
    "encoded_dim",
    "positional_encode",
    "positional_encode_backward",
    "FieldConfig",
    "FieldParams",
    "FieldTape",
    "SampleBatch",
    "check_finite",
    "eval_radiance",
    "eval_warp",
    "evaluation_counts",
    "forward_backward",
    "param_group",
    "query_field",
    "query_field_backward",
    "warp_jacobian",
]
