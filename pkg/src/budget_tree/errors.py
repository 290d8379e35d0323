"""Exception types.  The CLI maps each family onto an exit code."""


class BudgetTreeError(Exception):
    exit_code = 1


class ConfigError(BudgetTreeError):
    exit_code = 2


class DataError(ConfigError):
    pass


class MissingLabelColumn(DataError):
    pass


class NonNumericValue(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class EmptyFile(DataError):
    pass


class SensorConfigError(ConfigError):
    pass


class TreeError(BudgetTreeError):
    pass


class AllSubsetsEmpty(BudgetTreeError):
    exit_code = 3


class ModelFormatError(BudgetTreeError):
    exit_code = 4


class SolverError(BudgetTreeError):
    exit_code = 5

    def __init__(self, status, message=""):
        self.status = status
        super().__init__(message or f"LP solver finished with status {status!r}")


class TrainingDivergence(BudgetTreeError):
    def __init__(self, iteration, step_size):
        self.iteration = iteration
        self.step_size = step_size
        super().__init__(
            f"logistic training diverged at iteration {iteration} (step size {step_size:g})"
        )
