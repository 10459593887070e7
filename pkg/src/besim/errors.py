"""Exception hierarchy shared across the package."""

from __future__ import annotations


class BesimError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(BesimError):
    """Invalid grid, parameter, or run configuration."""


class InputError(BesimError):
    """A caller-supplied field violates a precondition."""


class DimensionError(BesimError):
    """Fields or spectral objects live on incompatible grids."""


class NumericalStateError(BesimError):
    """A field or intermediate became non-finite.

    ``term`` names the offending quantity when it could be attributed.
    """

    def __init__(self, message: str, term: str | None = None):
        super().__init__(message if term is None else f"{message} (term: {term})")
        self.term = term


class StepRejectedError(BesimError):
    """Time step rejected (CFL guard); carries a usable dt suggestion."""

    def __init__(self, message: str, suggested_dt: float):
        super().__init__(f"{message}; suggested dt <= {suggested_dt:.6g}")
        self.suggested_dt = suggested_dt


class PicardDivergenceError(BesimError):
    """Within-step fixed-point iteration failed to converge."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class ObserverError(BesimError):
    """An observer callback raised during integration."""

    def __init__(self, message: str, step: int, time: float):
        super().__init__(f"{message} (step {step}, t={time:.6g})")
        self.step = step
        self.time = time


class CheckpointFormatError(BesimError):
    """Checkpoint file is corrupted or not a checkpoint at all."""
