"""Maximum entropy random walks: exact kernels, Monte Carlo and scaling-limit checks."""

from __future__ import annotations

from .errors import MerwError
from .graph import (
    Eigenpair,
    MarkovKernel,
    WeightedGraph,
    entropy_rate,
    grw_kernel,
    merw_kernel,
    path_probability,
    power_iterate,
    verify_ground_state,
)
from .halfline import HalfLineModel, build_model

__version__ = "0.1.0"

__all__ = [
    "Eigenpair",
    "HalfLineModel",
    "MarkovKernel",
    "MerwError",
    "WeightedGraph",
    "build_model",
    "entropy_rate",
    "grw_kernel",
    "merw_kernel",
    "path_probability",
    "power_iterate",
    "verify_ground_state",
]
