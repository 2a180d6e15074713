"""Exception types raised across the pipeline.

Every error the package raises on bad data or bad usage derives from
``LesionError`` so callers (and the CLI) can catch one base class.
"""


class LesionError(Exception):
    """Base class for all pipeline errors."""


# --- ground truth / dataset ---

class MissingHeader(LesionError):
    pass


class DuplicateImageId(LesionError):
    pass


class LabelOutOfDomain(LesionError):
    pass


class RaggedRow(LesionError):
    pass


class InvalidImageId(LesionError):
    pass


class MissingImageFile(LesionError):
    pass


class EmptyDataset(LesionError):
    pass


class ImageDecodeError(LesionError):
    pass


# --- preprocessing ---

class ZeroDimension(LesionError):
    pass


class FractionOutOfRange(LesionError):
    pass


# --- embedding ---

class WrongInputShape(LesionError):
    pass


class BackendFailure(LesionError):
    pass


class ModelLoadError(LesionError):
    pass


class ShapeMismatch(LesionError):
    pass


class CacheFormatError(LesionError):
    pass


class BackendMismatch(LesionError):
    pass


# --- classifier / training ---

class NonFiniteInput(LesionError):
    pass


class NonFiniteGradient(LesionError):
    pass


class NonFiniteLoss(LesionError):
    pass


class LabelMissing(LesionError):
    pass


# --- checkpoint format ---

class BadMagic(LesionError):
    pass


class UnsupportedVersion(LesionError):
    pass


class TruncatedFile(LesionError):
    pass


class DimensionMismatch(LesionError):
    pass


# --- evaluation ---

class LengthMismatch(LesionError):
    pass


class EmptyInput(LesionError):
    pass


class DegenerateLabels(LesionError):
    pass


class IdMismatch(LesionError):
    pass


# --- configuration ---

class ConfigError(LesionError):
    pass
