"""Exception types raised across the package."""


class StsJoinError(Exception):
    """Base class for every error raised by stsjoin."""


class ParameterError(StsJoinError, ValueError):
    """A numeric parameter is outside its valid range."""


class DegenerateSegmentError(StsJoinError, ValueError):
    """Two consecutive points share a timestamp."""


class OutOfRangeError(StsJoinError, ValueError):
    """A timestamp or value lies outside the supported domain."""


class IngestionError(StsJoinError, ValueError):
    """A segment cannot be placed into the index."""


class TrajectoryFormatError(StsJoinError, ValueError):
    """A trajectory file row is malformed.

    ``line`` is the 1-based line number in the offending file, if known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownTrajectoryError(StsJoinError, KeyError):
    """A client does not hold the requested local trajectory id."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown trajectory"
