"""Exception and warning types shared across the package."""


class ThybridError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSpec(ThybridError, ValueError):
    pass


class FormatError(ThybridError, ValueError):
    """A point cloud or config file could not be parsed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidTransform(ThybridError, ValueError):
    pass


class EmptyCloud(ThybridError, ValueError):
    pass


class EmptyCloudWarning(UserWarning):
    pass


class DegenerateCell(ThybridError, ValueError):
    """Fewer than three points, or all points collinear."""


class DegenerateProjection(ThybridError, ValueError):
    """The terrain normal is (nearly) parallel to the robot's lateral axis."""


class CorruptFile(ThybridError, IOError):
    pass


class VersionMismatch(ThybridError, IOError):
    pass


class InvalidStart(ThybridError, ValueError):
    pass


class InvalidGoal(ThybridError, ValueError):
    pass


class SamplingExhausted(ThybridError, RuntimeError):
    pass
