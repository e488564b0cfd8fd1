"""Exception types shared across the package."""


class StfError(Exception):
    """Base class for all package-specific errors."""


class MalformedPenman(StfError):
    """Raised when a PENMAN expression cannot be parsed."""


class UnknownNode(StfError):
    """Raised when a node id is not present in a graph."""


class UnalignedNode(StfError):
    """Raised when a path node has no token span to draw its embedding from."""


class EmptyInput(StfError):
    """Raised when an operation receives an empty token sequence."""


class ShapeMismatch(StfError):
    """Raised when tensor shapes disagree with a declared contract."""


class EmptySpan(StfError):
    """Raised when a span covers no tokens."""


class OutOfBounds(StfError):
    """Raised when a span exceeds the sentence it indexes into."""


class OutOfRange(StfError):
    """Raised when a scalar argument falls outside its documented range."""


class DegenerateLabelSpace(StfError):
    """Raised when negative sampling has no wrong label to draw."""


class NonFiniteLoss(StfError):
    """Raised when training produces a NaN or infinite loss."""


class MissingAmr(StfError):
    """Raised when a sentence has no associated AMR graph."""


class LengthMismatch(StfError):
    """Raised when paired prediction/gold lists differ in length."""


class EmptySeries(StfError):
    """Raised when checkpoint selection receives no checkpoints."""


class SchemaError(StfError):
    """Raised when a data file violates its documented record schema."""


class IoError(StfError):
    """Raised when a data file cannot be read or written."""


class DuplicateSentId(StfError):
    """Raised when a bundle defines the same sentence id twice."""


class ConfigError(StfError):
    """Raised when a run configuration is invalid."""


class UnknownCommand(StfError):
    """Raised when the CLI is invoked with an unrecognized subcommand."""


class MissingLogs(StfError):
    """Raised when report generation finds no event logs in a run directory."""
