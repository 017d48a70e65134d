"""Exception hierarchy shared by all engine modules.

Every error raised on a contract violation derives from ``EngineError`` so
callers (and the CLI) can catch one type and still report the specific
failure class by name.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


# --- embedding store ---------------------------------------------------------

class BadMagic(EngineError):
    """File does not start with the expected magic bytes."""


class DimMismatch(EngineError):
    """Vector or matrix dimensions do not agree."""


class NonFiniteEntry(EngineError):
    """An embedding contains NaN or Inf."""


class NotUnitNorm(EngineError):
    """A raw embedding deviates from unit L2 norm beyond tolerance."""


class DuplicateId(EngineError):
    """Two rows share the same identifier."""


class UnknownId(EngineError):
    """Identifier not present in the set."""


class ManifestMismatch(EngineError):
    """Sidecar manifest disagrees with the binary header."""


# --- calibration -------------------------------------------------------------

class EmptySet(EngineError):
    """Operation requires a non-empty (or large enough) embedding set."""


class NonNegativeMin(EngineError):
    """Calibration similarities never go negative; set is not diverse enough."""


# --- projection --------------------------------------------------------------

class EmptyPositiveCorpus(EngineError):
    """The positive corpus has no entries."""


class NotSymmetric(EngineError):
    """Matrix is not symmetric within tolerance."""


class NoConvergence(EngineError):
    """Eigendecomposition failed or exceeded the residual tolerance."""


class NoPositiveEigenvalues(EngineError):
    """The contrastive covariance has no positive spectrum to retain."""


# --- contextualization / embedder --------------------------------------------

class EmptyCorpus(EngineError):
    """No corpus terms available for phrase composition."""


class EmbedderUnavailable(EngineError):
    """The embedding service cannot be reached."""


class MissingOfflineEntry(EngineError):
    """Offline embedding store has no entry for an input."""


# --- expansion / scoring -----------------------------------------------------

class EmptyDatabase(EngineError):
    """Query expansion requested against an empty database."""


class NonNegativeMinStat(EngineError):
    """Min-normalization needs a strictly negative minimum statistic."""


class InvalidWeight(EngineError):
    """Mixing weight outside [0, 1]."""


class NegativeInputForGeometricBlend(EngineError):
    """Geometric blending is defined on non-negative scores only."""


class FingerprintMismatch(EngineError):
    """Calibration stats were measured under a different projection."""


class ConfigDependencyViolation(EngineError):
    """Component toggles violate a dependency rule."""


# --- evaluation --------------------------------------------------------------

class NoPositives(EngineError):
    """A query has an empty positive set."""


class EmptyInput(EngineError):
    """Aggregate over an empty collection."""


class InvalidK(EngineError):
    """Rank cutoff must be >= 1."""


class MissingEmbedding(EngineError):
    """Manifest references an id absent from the embedding store."""


class ManifestInvariantViolation(EngineError):
    """Dataset manifest violates a structural invariant."""
