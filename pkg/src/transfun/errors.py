"""Exception types shared across the package."""


class TransfunError(Exception):
    """Base class for all workspace errors."""


class DimensionMismatch(TransfunError):
    """A field, measure, or covering was used with the wrong point dimension."""


class AbsoluteContinuityError(TransfunError):
    """A measure has mass at a point where the reference measure has none."""

    def __init__(self, point, message=None):
        self.point = tuple(point)
        super().__init__(message or f"no reference mass at support point {self.point}")


class CoverageError(TransfunError):
    """Support points fall outside the covered compactum of the requested level."""

    def __init__(self, points, message=None):
        self.points = [tuple(p) for p in points]
        super().__init__(message or f"{len(self.points)} support point(s) outside the covered region: "
                                    f"{self.points[:5]}")


class PlanConsistencyError(TransfunError):
    """Coupling data violates a marginal or normalization constraint."""


class MarkovCheckError(TransfunError):
    """A transfunction failed the Markov property check; carries the report."""

    def __init__(self, report, message=None):
        self.report = report
        super().__init__(message or f"Markov check failed (max residual {report.max_residual:.3e})")
