"""Symmetry-constrained convolution kernels.

Thin re-export of the compiled module. Kernels here are constrained so that
mirrored/transposed positions share one trainable value (up to sign); the
expand/project/fold operations move between free coefficients and full
kernels, and the fast path pre-adds tied inputs so each orbit costs a single
multiply.
"""

from symconv._core import (
    ConfigError,
    ConstrainedConv2d,
    FormatError,
    ShapeError,
    TyingMap,
    allocate_filters,
    compression_ratio,
    conv2d_forward,
    count_params,
    free_param_count,
    symmetry_classes,
)

__all__ = [
    "ConfigError",
    "ConstrainedConv2d",
    "FormatError",
    "ShapeError",
    "TyingMap",
    "allocate_filters",
    "compression_ratio",
    "conv2d_forward",
    "count_params",
    "free_param_count",
    "symmetry_classes",
]
