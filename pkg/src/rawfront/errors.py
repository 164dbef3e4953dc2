"""Exception types raised across the package."""


class RawFrontError(Exception):
    """Base class for all package errors."""


class ValidationError(RawFrontError, ValueError):
    """An argument violates a documented precondition."""


class EmptyOutputError(ValidationError):
    """A convolution or framing step would produce zero output samples."""


class InputTooShortError(ValidationError):
    """The waveform is shorter than the front-end needs for one frame."""


class ShapeMismatchError(ValidationError):
    """A weight tensor does not match the configuration that consumes it."""


class ChunkTooShortError(ValidationError):
    """A chunk cannot hold even one receptive field."""


class AllSilentError(RawFrontError):
    """Voice activity detection found no speech frames.

    The (all-false) frame mask is kept on ``mask`` so callers can decide
    what to do with the utterance.
    """

    def __init__(self, message, mask=None):
        super().__init__(message)
        self.mask = mask


class DegenerateVectorError(RawFrontError, ArithmeticError):
    """A zero vector was asked to be normalized to unit length."""


class UnsupportedFormatError(RawFrontError):
    """Audio file is not 16-bit PCM mono at 16 kHz."""


class ArchiveError(RawFrontError):
    """Malformed weight archive."""


class BadMagicError(ArchiveError):
    pass


class TruncatedArchiveError(ArchiveError):
    pass


class DuplicateNameError(ArchiveError):
    pass


class FeatureFileError(RawFrontError):
    """Reading or writing a feature file failed."""
