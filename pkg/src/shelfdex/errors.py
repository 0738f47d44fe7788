"""Shared exception types. Every module raises these instead of bare ValueError
so callers can branch on failure class."""


class ShelfdexError(Exception):
    """Base class for all package errors."""


class DimensionError(ShelfdexError):
    """Tensor/array shapes incompatible with the operation."""


class ConfigError(ShelfdexError):
    """Invalid configuration value or key."""


class NumericError(ShelfdexError):
    """NaN/Inf or otherwise non-finite numeric state."""


class PlacementError(ShelfdexError):
    """Object placement overlaps another object or leaves its tier volume."""


class StateError(ShelfdexError):
    """Robot state outside joint limits or otherwise invalid."""


class UnknownObjectError(ShelfdexError):
    """Referenced object id is not present in the scene."""


class ObservationError(ShelfdexError):
    """Observation bundle is missing a required field."""


class NoConfidentView(ShelfdexError):
    """All external view confidences fell at or below the selection gate."""


class UnresolvableTarget(ShelfdexError):
    """Instruction noun does not resolve against the scene vocabulary."""


class AmbiguousTarget(ShelfdexError):
    """Instruction matches more than one object and no attribute disambiguates."""


class PlanningError(ShelfdexError):
    """Dependency graph contained a cycle (defensive; should not occur)."""


class PriorSamplingError(ShelfdexError):
    """Could not sample a successful grasp prior within the retry budget."""


class ExpertFailure(ShelfdexError):
    """Scripted expert could not complete the episode (scene excluded)."""


class DataError(ShelfdexError):
    """Dataset/trace file missing, malformed, or lacking required rows."""
