"""Euclidean invariant recognition with local Fourier-Mellin descriptors.

The pipeline convolves an image with a bank of log-polar harmonic kernels,
turns response magnitudes into per-pixel unit descriptors, encodes them with
VLAD and classifies the encodings with a linear SVM. A magnitude-only image
reconstruction routine lives in :mod:`lfmd.reconstruction`.
"""

from .errors import (
    ConfigError,
    ConsistencyError,
    FormatError,
    InputError,
    LFMDError,
    NumericError,
    ParameterError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConsistencyError",
    "FormatError",
    "InputError",
    "LFMDError",
    "NumericError",
    "ParameterError",
    "__version__",
]
