"""Exception hierarchy shared across the package."""


class BanditLabError(Exception):
    pass


class InvalidInputError(BanditLabError, ValueError):
    pass


class InvalidSpecError(InvalidInputError):
    pass


class ConfigError(BanditLabError):
    pass


class SingularDesignError(BanditLabError):
    """Design or Gram matrix is not invertible where it must be."""

    def __init__(self, message, rank=None):
        super().__init__(message if rank is None else f"{message} (rank {rank})")
        self.rank = rank


class NonUniqueOptimumError(BanditLabError):
    pass


class InfeasibleQueryError(BanditLabError):
    """Every feasible arm hits a -inf sentinel coordinate."""


class CoverageError(BanditLabError):
    def __init__(self, coordinate):
        super().__init__(f"coordinate {coordinate} is not covered by any arm")
        self.coordinate = coordinate


class InfeasibleDesignError(BanditLabError):
    def __init__(self, message, best_value=None):
        super().__init__(message)
        self.best_value = best_value
