"""Pseudo-spectral solver for the 2D Nernst-Planck equations coupled to
Euler or Navier-Stokes flow on the periodic torus."""

from .errors import (BadMagic, ChecksumMismatch, NoContraction, NonFinite, NonZeroMean, NPEError,
                     ParseError, SnapshotError, ValidationError, VersionMismatch)
from .model import PhysParams, SimState, Tendency, Variant, tendency, velocity_form_tendency
from .spectral import Grid, SpectralField2D
from .timestep import StepperConfig, integrate, step

__version__ = "0.1.0"

__all__ = [
    "BadMagic", "ChecksumMismatch", "Grid", "NoContraction", "NonFinite", "NonZeroMean", "NPEError",
    "ParseError", "PhysParams", "SimState", "SnapshotError", "SpectralField2D", "StepperConfig",
    "Tendency", "ValidationError", "Variant", "VersionMismatch", "integrate", "step", "tendency",
    "velocity_form_tendency",
]
