"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for bad data or parameters, 3 for numerical failures.
"""


class NseError(Exception):
    exit_code = 2

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class InvalidParameterError(NseError, ValueError):
    pass


class LengthError(InvalidParameterError):
    pass


class ShapeError(InvalidParameterError):
    pass


class OutOfRangeError(InvalidParameterError):
    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)

    def to_dict(self):
        d = super().to_dict()
        d["offending"] = [list(map(_plain, o)) for o in self.offending]
        return d


class AlignmentError(InvalidParameterError):
    pass


class InsufficientDataError(InvalidParameterError):
    pass


class CoverageError(InvalidParameterError):
    pass


class ParseError(NseError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset

    def to_dict(self):
        d = super().to_dict()
        d["offset"] = self.offset
        return d


class NumericalError(NseError):
    exit_code = 3


class DesignFailureError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, last_delta):
        super().__init__(f"{message} (last delta {last_delta:.3e})")
        self.last_delta = float(last_delta)

    def to_dict(self):
        d = super().to_dict()
        d["last_delta"] = self.last_delta
        return d


class RankError(NumericalError):
    pass


class DecompositionError(NumericalError):
    pass


class DegenerateInputError(NumericalError):
    pass


def _plain(v):
    try:
        return v.item()
    except AttributeError:
        return v
