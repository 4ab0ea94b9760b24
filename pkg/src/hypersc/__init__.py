"""Computable hyperbolic geometry and small cancellation on finite models."""

__version__ = "0.1.0"

from hypersc.metric_core import (
    DeltaReport,
    FiniteLengthSpace,
    InputError,
    gromov_product,
    hyperbolicity_delta,
    load_space,
)

__all__ = [
    "DeltaReport",
    "FiniteLengthSpace",
    "InputError",
    "gromov_product",
    "hyperbolicity_delta",
    "load_space",
    "__version__",
]
