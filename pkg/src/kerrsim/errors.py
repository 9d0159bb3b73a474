"""Exception types raised by the simulation and reconstruction code."""

from __future__ import annotations


class KerrsimError(Exception):
    """Base class for package-specific failures."""


class ConfigError(KerrsimError):
    """Invalid configuration (bad field values, malformed config file)."""


class NumericalError(KerrsimError):
    """A numerical contract was violated during a computation."""


class TruncationOverflowError(NumericalError):
    """Truncated Fock space is too small for the requested operation."""


class SubspaceSupportError(NumericalError):
    """State carries non-negligible support outside the required subspace."""


class StageError(NumericalError):
    """Pipeline stage failure; carries the name of the stage that failed."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")
