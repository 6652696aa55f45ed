"""Exception hierarchy.

Every error raised on purpose by the library derives from ``BernoulliLabError``
so callers (the CLI in particular) can tell contract violations apart from
programming errors.
"""


class BernoulliLabError(Exception):
    pass


class ResolutionTooCoarse(BernoulliLabError, ValueError):
    pass


class InvalidDimension(BernoulliLabError, ValueError):
    pass


class PointOutsideDomain(BernoulliLabError, ValueError):
    pass


class TargetRadiusExceedsDomain(BernoulliLabError, ValueError):
    pass


class MismatchedGrids(BernoulliLabError, ValueError):
    pass


class NonEllipticCoefficients(BernoulliLabError, ValueError):
    pass


class SolverDivergence(BernoulliLabError, RuntimeError):
    pass


class NonpositiveEpsilon(BernoulliLabError, ValueError):
    pass


class InvalidSpec(BernoulliLabError, ValueError):
    pass


class Stagnation(BernoulliLabError, RuntimeError):
    """Raised when no restart produces an audited minimizer.

    The best candidate found is still attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoContactPoint(BernoulliLabError, ValueError):
    pass


class BallOutsideDomain(BernoulliLabError, ValueError):
    pass


class RadiusOverflow(BernoulliLabError, ValueError):
    pass


class AnalysisRegionTooSmall(BernoulliLabError, ValueError):
    pass


class ProbeOutsideDomain(BernoulliLabError, ValueError):
    pass


class InvalidLambdaOrdering(BernoulliLabError, ValueError):
    pass


class ConfigInvalid(BernoulliLabError, ValueError):
    pass
