"""Conveyor-belt clock synchronization toolkit.

``belt``        abstract sand-on-a-belt protocol, ranging and rate feedback
``optics``      coherent-pulse implementation: fringes, flux, dispersion immunity
``biphoton``    entangled-pair implementation: coincidence dip, odd-order cancellation
``estimator``   multi-pulse trial-shift scans with shot noise and null finding
``relativity``  exact-in-v/c delay, roundtrip and Doppler-scaled dispersion
``cli``         TOML scenario runner
"""
__version__ = "0.1.0"

from . import belt, biphoton, estimator, kernels, optics, relativity  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    ConveyorSyncError,
    ConvergenceError,
    GridResolutionError,
    GridTooCoarseError,
    NullSearchError,
    NumericalError,
)

__all__ = [
    "__version__",
    "belt",
    "biphoton",
    "estimator",
    "kernels",
    "optics",
    "relativity",
    "ConfigError",
    "ConveyorSyncError",
    "ConvergenceError",
    "GridResolutionError",
    "GridTooCoarseError",
    "NullSearchError",
    "NumericalError",
]
