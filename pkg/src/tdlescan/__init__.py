"""Pair-exponent diagnostics for partial synchronization in rings of forced oscillators."""

__version__ = "0.1.0"

from .model import NetworkSpec, NodeParams, RunOptions  # noqa: E402
from .tdle import TdleRun, TdleSpectrum  # noqa: E402

__all__ = ["NetworkSpec", "NodeParams", "RunOptions", "TdleRun", "TdleSpectrum", "__version__"]
