"""Exception types raised by the solver components."""


class InfstartError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(InfstartError):
    pass


class SingularSystem(InfstartError):
    pass


class NotInterior(InfstartError):
    """A point is on or outside the boundary of its cone."""


class OutOfDomain(InfstartError):
    """An auxiliary point violates one of the domain conditions of the barrier objective."""


class ProblemError(InfstartError):
    """Problem data failed validation."""


class DimensionMismatch(ProblemError):
    pass


class RankDeficient(ProblemError):
    pass


class CInRangeOfAT(ProblemError):
    pass


class NotStrictlyFeasible(InfstartError):
    pass


class FormatError(InfstartError):
    """Malformed problem file. ``field`` and ``line`` locate the offending entry."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field is not None:
            where = f"{field}: "
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"{where}{message}{suffix}")
