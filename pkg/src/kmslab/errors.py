"""Exception hierarchy shared by all kmslab modules."""

from __future__ import annotations


class KmsLabError(Exception):
    """Base class for every error raised by kmslab."""


class GraphFormatError(KmsLabError, ValueError):
    """Malformed graph input (dangling vertex reference, duplicate ids, bad JSON)."""


class EnumerationCapError(KmsLabError):
    """A path enumeration would exceed the configured cap."""


class SinkError(KmsLabError):
    """The graph has a sink, so the shift on the path space is not surjective."""


class NoCycleError(KmsLabError):
    """The graph has no cycle: the path space is empty and rho(A) = 0."""


class SubcriticalTemperature(KmsLabError):
    """The requested inverse temperature is not strictly above the critical one."""


class ResolutionError(KmsLabError):
    """A cylinder query goes deeper than the finite depth a measure was built to."""


class PreconditionError(KmsLabError, ValueError):
    """An argument violates a documented precondition."""


class DimensionCapError(KmsLabError):
    """A Fock truncation level would exceed the dimension cap."""
