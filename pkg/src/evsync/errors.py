"""Exception hierarchy for evsync."""

from __future__ import annotations


class EvsyncError(Exception):
    """Base class for every error raised by this package."""


# event model


class InvalidEvent(EvsyncError, ValueError):
    """An event field is outside its domain (negative time, bad polarity)."""


class OutOfOrderTimestamps(EvsyncError, ValueError):
    def __init__(self, index: int, previous: int, current: int):
        self.index = index
        super().__init__(
            f"timestamps decrease at index {index}: {current} < {previous}"
        )


class OutOfBoundsPixel(EvsyncError, ValueError):
    def __init__(self, index: int, x: int, y: int, width: int, height: int):
        self.index = index
        self.x = x
        self.y = y
        super().__init__(
            f"event {index} at ({x}, {y}) outside {width}x{height} sensor"
        )


class EmptyStream(EvsyncError, ValueError):
    """Operation needs at least one event."""


# density


class InvalidBinWidth(EvsyncError, ValueError):
    pass


class WindowNotMultipleOfTau(EvsyncError, ValueError):
    pass


class EmptyDistribution(EvsyncError, ValueError):
    """Distribution holds no events, so percentiles are undefined."""


# estimator


class InvalidConfig(EvsyncError, ValueError):
    pass


class MismatchedTau(EvsyncError, ValueError):
    """Two distributions do not share a bin grid."""


class NoOverlap(EvsyncError, ValueError):
    pass


class NoValidCandidate(EvsyncError):
    """Every candidate offset was skipped (overlap too small or massless)."""


class StreamExhausted(EvsyncError):
    pass


# synchronizer


class TooFewStreams(EvsyncError, ValueError):
    pass


# synthgen


class InvalidDuration(EvsyncError, ValueError):
    pass


# file formats


class MalformedHeader(EvsyncError, ValueError):
    pass


class MalformedRow(EvsyncError, ValueError):
    def __init__(self, line_number: int, line: str, reason: str = ""):
        self.line_number = line_number
        msg = f"line {line_number}: cannot parse {line!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class IoFailure(EvsyncError, OSError):
    pass
