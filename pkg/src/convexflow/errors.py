"""Exception types raised across the library."""


class ConvexFlowError(Exception):
    """Base class for library errors."""


class GridTooSmall(ConvexFlowError):
    pass


class RankMismatch(ConvexFlowError):
    pass


class OutOfTimeRange(ConvexFlowError):
    pass


class TruncationTooCoarse(ConvexFlowError):
    pass


class OutsideGeometricBall(ConvexFlowError):
    pass


class GeometricBallViolation(ConvexFlowError):
    pass


class ParamViolation(ConvexFlowError):
    def __init__(self, clauses):
        self.clauses = list(clauses)
        super().__init__("parameter clauses violated: " + "; ".join(self.clauses))


class NonIntegerModes(ConvexFlowError):
    pass


class SupportTooWide(ConvexFlowError):
    pass


class ConsistencyFailure(ConvexFlowError):
    pass


class NotDivergenceFree(ConvexFlowError):
    pass


class NonzeroMean(ConvexFlowError):
    pass


class Infeasible(ConvexFlowError):
    pass


class FormatError(ConvexFlowError):
    pass
