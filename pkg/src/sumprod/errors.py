"""Exception types raised across the package."""


class SumProductError(ValueError):
    """Base class for every domain error raised by sumprod."""


class CofactorRemains(SumProductError):
    pass


class EmptyIndexSet(SumProductError):
    pass


class NonPositiveElement(SumProductError):
    pass


class GridTooCoarse(SumProductError):
    pass


class CoprimalityViolated(SumProductError):
    pass


class DensityTooLow(SumProductError):
    pass


class HypothesisFails(SumProductError):
    pass


class NoValidSplit(SumProductError):
    pass


class EmptyAfterRegularization(SumProductError):
    pass


class EmptyFeasibleSet(SumProductError):
    pass


class ConstantSearchFailed(SumProductError):
    pass


class ChainTooShort(SumProductError):
    pass


class InvalidSpec(SumProductError):
    pass


class BudgetExceeded(SumProductError):
    """A size budget was hit; ``partial`` carries whatever was computed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
