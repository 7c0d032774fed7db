"""Exception hierarchy shared by all modules."""


class SteklovError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidCurveError(SteklovError, ValueError):
    """A curve specification violates one of its invariants."""


class RadiusNonPositive(InvalidCurveError):
    pass


class OddNodeCount(InvalidCurveError):
    pass


class UnderResolvedCurve(InvalidCurveError):
    pass


class CurveMismatch(SteklovError, ValueError):
    """A boundary field was sampled on a different curve."""


class IllConditioned(SteklovError, ArithmeticError):
    """The truncated least-squares system lost too much rank."""


class EigSolveFailure(SteklovError, ArithmeticError):
    pass


class NotNormalized(SteklovError, ValueError):
    pass


class NotOrthonormal(SteklovError, ValueError):
    pass


class NotOrthogonal(SteklovError, ValueError):
    pass


class ConsistencyError(SteklovError, ArithmeticError):
    """Two routes to the same quantity disagree beyond tolerance."""


class TrackingAmbiguous(SteklovError, RuntimeError):
    """Eigenvector overlaps do not single out a branch assignment."""


class SimpleCluster(SteklovError, ValueError):
    pass


class InvalidPerturbedCurve(InvalidCurveError):
    pass


class SchemaError(SteklovError, ValueError):
    """Configuration failed validation.

    ``errors`` holds ``(path, reason)`` pairs, one per violation.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path}: {reason}" for path, reason in self.errors]
        super().__init__("invalid configuration\n  " + "\n  ".join(lines))


class IoError(SteklovError, OSError):
    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"cannot write {self.path}: {reason}")
