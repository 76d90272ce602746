"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it.
"""


class MrflowError(Exception):
    exit_code = 1


class FormatError(MrflowError):
    """A file could not be parsed (bad PFM/PGM header, truncated payload)."""

    exit_code = 2


class InvalidInputError(MrflowError, ValueError):
    exit_code = 2


class MissingPartError(MrflowError, KeyError):
    exit_code = 3

    def __str__(self):
        return Exception.__str__(self)


class MismatchError(MrflowError):
    """Predictions do not line up with the dataset they claim to cover."""

    exit_code = 4


class IncompleteInputError(MismatchError):
    pass


class ShapeError(MismatchError, ValueError):
    pass


class NumericalError(MrflowError):
    exit_code = 5


class InvalidDepthError(NumericalError, ValueError):
    pass


class BehindCameraError(NumericalError, ValueError):
    pass


class DegenerateGeometryError(NumericalError):
    pass


class ParallelPlanesError(DegenerateGeometryError):
    pass


class InsufficientPointsError(NumericalError):
    pass


class NoConsensusError(NumericalError):
    pass


class InsufficientObservationError(NumericalError):
    pass


class PlaneFitFailedError(NumericalError):
    pass


class JointLimitError(MrflowError, ValueError):
    exit_code = 2
