"""Exception types shared across the package."""


class ScanlockError(Exception):
    """Base class for all scanlock errors."""


class BenchSyntaxError(ScanlockError):
    """Malformed BENCH text; carries the offending line and column."""

    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class CycleError(ScanlockError):
    """The combinational portion of a netlist contains a loop."""


class UndefinedNet(ScanlockError):
    """A net is referenced but never driven by a PI, gate, or DFF."""


class DuplicateNet(ScanlockError):
    """The same net name is driven more than once."""


class MissingAssignment(ScanlockError):
    """An evaluation was started without values for all inputs."""


class UnknownNet(ScanlockError):
    """A net name does not exist in the netlist."""


class TooManyKeys(ScanlockError):
    """More key gates requested than insertable nets."""


class KeyLengthMismatch(ScanlockError):
    """Key length differs from the design's declared key size."""


class SignatureMismatch(ScanlockError):
    """Two netlists do not share the same PI/PO signature."""


class NoStateElements(ScanlockError):
    """Scan stitching requires at least one DFF."""


class InvalidPins(ScanlockError):
    """Pin values are not valid for the design's architecture."""


class UnsupportedForArch(ScanlockError):
    """Operation is not defined for this architecture."""


class BlockedScanOut(ScanlockError):
    """A test flow read a masked scan-out; the flow itself is buggy."""


class Unsatisfiable(ScanlockError):
    """The oracle's answers are inconsistent with the circuit model."""


class IterationLimit(ScanlockError):
    """An attack loop exceeded its configured iteration budget."""


class TooLarge(ScanlockError):
    """Problem size exceeds what exhaustive search is allowed to handle."""


class WindowNotFound(ScanlockError):
    """No safe glitch pulse width exists under the given delay model."""
