"""Exception hierarchy.

Every error raised by the library derives from :class:`DyskitError`; most
also derive from ``ValueError`` so callers that only care about bad input
can catch the builtin.
"""


class DyskitError(Exception):
    pass


# audio ingest
class AudioError(DyskitError):
    pass


class MalformedWav(AudioError, ValueError):
    pass


class UnsupportedEncoding(AudioError, ValueError):
    pass


class EmptyAudio(AudioError, ValueError):
    pass


class OutOfRange(AudioError, ValueError):
    pass


class EmptySegment(AudioError, ValueError):
    pass


# front-end
class FrontendError(DyskitError, ValueError):
    pass


class EmptySignal(FrontendError):
    pass


class SignalTooShort(FrontendError):
    pass


class InvalidLength(FrontendError):
    pass


class LengthMismatch(FrontendError):
    pass


class BadFftSize(FrontendError):
    pass


class NegativeFrequency(FrontendError):
    pass


class NegativeMel(FrontendError):
    pass


class BandTooNarrow(FrontendError):
    pass


class TooManyCoefficients(FrontendError):
    pass


class InvalidConfig(FrontendError):
    pass


# features / classifiers
class TooFewFrames(DyskitError, ValueError):
    pass


class DimensionMismatch(DyskitError, ValueError):
    pass


class EmptyDataset(DyskitError, ValueError):
    pass


class SingleClassDataset(DyskitError, ValueError):
    pass


class KTooLarge(DyskitError, ValueError):
    pass


class DidNotConverge(DyskitError):
    """Raised by callers that refuse an SVM model flagged as unconverged."""


class ModelFormatError(DyskitError, ValueError):
    pass


class IncompatibleFeatures(DyskitError, ValueError):
    """Feature extraction settings differ between two artifacts."""


# corpus
class ManifestParseError(DyskitError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MissingAudio(DyskitError, FileNotFoundError):
    pass


class SegmentError(DyskitError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UnsupportedType(DyskitError, ValueError):
    pass


# evaluation
class ClassTooSmall(DyskitError, ValueError):
    pass


class MissingClass(DyskitError, ValueError):
    pass
