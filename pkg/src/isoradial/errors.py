"""Exception types raised across the package."""


class IsoradialError(Exception):
    """Base class for all package errors."""


class ParseError(IsoradialError):
    pass


class GeometryError(IsoradialError):
    """A graph failed an isoradiality check.

    ``kind`` names the violated invariant, e.g. ``"angle-sum"``,
    ``"unit-edge"``, ``"dual-length"``, ``"coloring"``, ``"degenerate"``.
    """

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class DomainError(IsoradialError, ValueError):
    pass


class GraphError(IsoradialError):
    pass


class NotFound(IsoradialError):
    pass


class NotAPole(IsoradialError):
    pass


class PoleEvaluation(IsoradialError, ZeroDivisionError):
    pass


class BoundaryError(IsoradialError):
    pass


class NotAdjacent(IsoradialError):
    pass


class WindowError(IsoradialError):
    pass


class NotASuperposition(IsoradialError):
    pass


class PolygonError(IsoradialError):
    pass


class TooLarge(IsoradialError):
    pass


class SingularMatrix(IsoradialError):
    pass


class SingularGrid(IsoradialError):
    pass


class AtomOnPole(IsoradialError):
    pass


class NotAnalytic(IsoradialError):
    pass


class StitchError(IsoradialError):
    pass


class MaxIterations(IsoradialError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Infeasible(IsoradialError):
    pass
