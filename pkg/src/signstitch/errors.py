"""Exception hierarchy shared by every module."""


class SignStitchError(Exception):
    """Base class for all errors raised by signstitch."""


class DimensionError(SignStitchError, ValueError):
    """Array shapes or joint layouts do not agree."""


class GeometryError(SignStitchError, ValueError):
    """A frame is geometrically degenerate (coincident or collinear anchors)."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class InvalidGlossError(SignStitchError, ValueError):
    """A gloss string is empty after normalization."""


class UnresolvableGlossError(SignStitchError, KeyError):
    """A gloss has no dictionary entry and no usable embedding substitute."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class FilterSpecError(SignStitchError, ValueError):
    """Filter parameters are out of range (e.g. cutoff at or above Nyquist)."""


class DataError(SignStitchError, ValueError):
    """Input data contains non-finite values or violates a data invariant."""


class ArgumentError(SignStitchError, ValueError):
    """A scalar argument is out of its documented range."""


class SplineError(SignStitchError, ValueError):
    """Too few grid points to fit a smoothing spline."""


class MonotonicityError(SignStitchError, AssertionError):
    """A spectral objective that must be monotone in the cutoff was not."""


class FormatError(SignStitchError, ValueError):
    """A file does not follow its documented format."""
