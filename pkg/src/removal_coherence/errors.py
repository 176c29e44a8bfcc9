"""Exception types shared across the toolkit.

Every error raised on a contract violation derives from RemovalCoherenceError
so callers (and the CLI) can separate library failures from programming bugs.
"""

from __future__ import annotations


class RemovalCoherenceError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatch(RemovalCoherenceError):
    """Two arrays that must share dimensions do not."""


class EmptySet(RemovalCoherenceError):
    """A sample set that must be non-empty is empty."""


class EmptyMask(RemovalCoherenceError):
    """A mask that must contain at least one set pixel is all zero."""


class EmptyInput(RemovalCoherenceError):
    """A sequence that must contain at least one element is empty."""


class TooFewFrames(RemovalCoherenceError):
    """A temporal operation needs more frames than were supplied."""


class DegenerateCrop(RemovalCoherenceError):
    """A crop contains no background cells, so no reference set exists."""


class WindowTooLarge(RemovalCoherenceError):
    """Requested window does not fit inside the feature map."""


class FeatureUnavailable(RemovalCoherenceError):
    """The file backend holds no precomputed features for this crop."""


class ModelLoadError(RemovalCoherenceError):
    """A neural feature extractor asset is missing or malformed."""


class FormatError(RemovalCoherenceError):
    """A serialized artifact violates its wire format."""


class LevelTooLarge(RemovalCoherenceError):
    """A corruption level exceeds the number of eligible frames."""


class NoDonorAvailable(RemovalCoherenceError):
    """No donor frame satisfies the replacement distance constraint."""


class AmplitudeTooLarge(RemovalCoherenceError):
    """A camera-motion track would leave the frame bounds."""


class InvalidPermutation(RemovalCoherenceError):
    """A ranking row is not a valid (possibly tied) ranking of the methods."""


class LengthMismatch(RemovalCoherenceError):
    """Two rank vectors that must have equal length do not."""


class ItemMismatch(RemovalCoherenceError):
    """Two tables that must cover the same items or methods do not."""


class InputError(RemovalCoherenceError):
    """Bad user input at the command line (missing file, malformed table)."""
