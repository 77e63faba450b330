"""Exception and warning types raised across the package."""


class NeurosegError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(NeurosegError, ValueError):
    def __init__(self, a_shape, b_shape):
        super().__init__(f"shape mismatch: {tuple(a_shape)} vs {tuple(b_shape)}")
        self.shapes = (tuple(a_shape), tuple(b_shape))


class MarkerOutsideMask(NeurosegError, ValueError):
    def __init__(self, x, y):
        super().__init__(f"marker pixel ({x}, {y}) lies outside the mask")
        self.x, self.y = x, y


class EmptyGroundTruth(NeurosegError, ValueError):
    pass


class UndefinedRCE(NeurosegError, ZeroDivisionError):
    pass


class CoverageGap(NeurosegError, ValueError):
    def __init__(self, count):
        super().__init__(f"{count} canvas pixels are not covered by any tile")
        self.count = count


# --- io -------------------------------------------------------------------

class BadFormat(NeurosegError, ValueError):
    pass


class NotThreeChannel(BadFormat):
    pass


class LabelOverflow(NeurosegError, ValueError):
    pass


class UnknownColor(BadFormat):
    def __init__(self, pixel, color):
        super().__init__(f"unknown class color {tuple(color)} at pixel {tuple(pixel)}")
        self.pixel = tuple(pixel)
        self.color = tuple(color)


class LineError(NeurosegError, ValueError):
    """An error tied to one line of a text input (1-based ``line``)."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParseError(LineError):
    pass


class OutOfBounds(LineError):
    pass


class DuplicatePoint(LineError):
    pass


class MissingPair(NeurosegError, LookupError):
    def __init__(self, image_id, where):
        super().__init__(f"image '{image_id}' has no counterpart in {where}")
        self.image_id = image_id


# --- warnings -------------------------------------------------------------

class SeedOnBackground(UserWarning):
    """A seed point fell on a background pixel and was skipped."""

    def __init__(self, x, y):
        super().__init__(f"seed ({x}, {y}) lies on background; skipped")
        self.x, self.y = x, y


class PatchLargerThanImage(UserWarning):
    """The requested patch exceeds the image; it was shrunk to fit."""
