"""Exception hierarchy.

Every numerical failure maps to one class so that the command line front end
can translate it into a stable exit code.
"""


class PasteError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InvalidField(PasteError, ValueError):
    exit_code = 2


class InvalidParameter(PasteError, ValueError):
    exit_code = 2


class InvalidRegion(PasteError, ValueError):
    exit_code = 2


class SpecMismatch(PasteError, ValueError):
    exit_code = 2


class FormatError(PasteError, ValueError):
    exit_code = 2


class NotCompatible(PasteError):
    """Right-hand side violates the zero-integral solvability condition."""

    exit_code = 3


class NoContraction(PasteError):
    exit_code = 4


class RegionTooTight(PasteError):
    exit_code = 5


class GridTooCoarse(PasteError):
    exit_code = 6


class KernelTooWide(PasteError):
    exit_code = 6


class SolverFailure(PasteError):
    exit_code = 7


class DegenerateMap(PasteError):
    exit_code = 8


class NotDiffeo(DegenerateMap):
    exit_code = 8


class NotConservativeInput(PasteError):
    exit_code = 9


class TargetUnreachable(PasteError):
    exit_code = 10


class NoTwist(PasteError):
    exit_code = 11


class TwistLost(NoTwist):
    exit_code = 11
