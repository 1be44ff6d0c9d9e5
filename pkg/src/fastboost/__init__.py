"""FastBoost: a small convolutional classifier with schedule-driven attention fusion.

Pure numpy with optional numba-compiled kernels, selected by the
FASTBOOST_KERNELS environment variable ("numba" or "numpy").
"""

from .tensor import (
    DegenerateBatchError,
    GeometryError,
    NonFiniteError,
    ShapeError,
    Tensor,
    checked,
    no_grad,
)

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "no_grad",
    "checked",
    "ShapeError",
    "GeometryError",
    "DegenerateBatchError",
    "NonFiniteError",
    "__version__",
]
