"""Exception hierarchy shared across the package."""


class MonetError(Exception):
    """Base class for all package errors."""


class DomainError(MonetError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ParseError(MonetError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class MissingQuarter(MonetError):
    def __init__(self, message, missing=()):
        self.missing = tuple(missing)
        super().__init__(message)


class NonPositiveValue(MonetError, ValueError):
    pass


class UnknownCountry(MonetError, ValueError):
    pass


class ConvergenceError(MonetError):
    pass


class SupportError(MonetError, ValueError):
    """Sample values fall outside a distribution family's support."""


class OptimFail(MonetError):
    pass


class NoFeasibleFamily(MonetError):
    pass


class AllDivergent(MonetError):
    pass


class NonFiniteGradient(MonetError):
    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class DegenerateData(MonetError, ValueError):
    pass


class RankDeficiency(MonetError):
    pass


class DegenerateWeights(MonetError):
    pass


class EmptyInput(MonetError, ValueError):
    pass


class SingularDesign(MonetError):
    pass


class GridExhausted(MonetError):
    pass


class DegenerateTarget(MonetError):
    pass


class CollinearMembers(MonetError):
    pass


class ConfigError(MonetError, ValueError):
    pass
