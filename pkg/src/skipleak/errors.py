"""Exception taxonomy shared by every layer of the package.

All deliberate failures derive from :class:`SkipleakError` so callers (and the
CLI) can tell intentional rejections apart from genuine bugs.
"""

from __future__ import annotations


class SkipleakError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ConfigError(SkipleakError):
    """Invalid, unknown, or missing configuration input."""


class DimensionMismatch(SkipleakError):
    """An array argument has the wrong length or shape."""


class NonFiniteInput(SkipleakError):
    """An input vector contains NaN or infinity."""


class EmptyDataset(SkipleakError):
    """A dataset (file or in-memory) contains no rows."""


class EmptyInput(SkipleakError):
    """An operation received an empty sequence where values are required."""


class LengthMismatch(SkipleakError):
    """Two paired sequences differ in length."""


class InconsistentStats(SkipleakError):
    """Activation statistics do not match the model geometry."""


class AttributeOutOfRange(SkipleakError):
    """A sensitive attribute index lies outside [0, k)."""


class UnknownIdentifier(SkipleakError):
    """An identifier was queried that was never registered."""


class EmptyEvaluationSet(SkipleakError):
    """A service evaluation was requested with zero queries."""


class TooFewDistinctPoints(SkipleakError):
    """Clustering requested more clusters than distinct values."""


class AmbiguousCluster(SkipleakError):
    """A cluster has no anchored attribute mapping."""


class DegenerateLabels(SkipleakError):
    """A supervised fit received fewer than two distinct labels."""


class DegenerateSample(SkipleakError):
    """A statistical sample is too small or has no variance."""


class FeatureLayoutMismatch(SkipleakError):
    """A feature matrix does not match the layout a model was fit with."""


class FractionSumInvalid(SkipleakError):
    """Split fractions are negative or do not sum to one."""


class MalformedRow(SkipleakError):
    """A persisted file contains a row that cannot be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IoFailure(SkipleakError):
    """Reading or writing a file failed."""
