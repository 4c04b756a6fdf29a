"""Exception hierarchy.

Budget-type errors (``BudgetError`` subclasses) report that a bounded search
ran out of room; they never claim that the sought object does not exist.
"""


class CaristiError(Exception):
    """Base class for all errors raised by this package."""


class BudgetError(CaristiError):
    """A finite search budget was exhausted."""


class OracleFailure(CaristiError):
    """A point oracle could not produce the requested approximation."""


class NotUltrametric(CaristiError):
    pass


class NotInDomain(BudgetError):
    def __init__(self, budget: int, detail: str = ""):
        self.budget = budget
        super().__init__(f"no applicable clause within budget {budget}" + (f": {detail}" if detail else ""))


class NotMonotone(CaristiError):
    pass


class NotOpenPreimage(CaristiError):
    pass


class DivergenceBudget(BudgetError):
    pass


class EmptySample(CaristiError):
    pass


class BudgetExhausted(BudgetError):
    pass


class NoProgress(BudgetError):
    def __init__(self, n_max: int, rho):
        self.n_max = n_max
        self.rho = rho
        super().__init__(f"rho(b_{n_max}) = {rho} has not reached the target precision")


class NestingViolation(CaristiError):
    pass


class CaristiViolation(CaristiError):
    pass


class TruncationError(BudgetError):
    """A finite gadget input is too small for the requested evaluation."""


class TreeTooShallow(TruncationError):
    def __init__(self, leaf):
        self.leaf = tuple(leaf)
        super().__init__(f"no successor leaf for {self.leaf} inside the finite tree")


class TableExhausted(TruncationError):
    def __init__(self, k: int):
        self.k = k
        super().__init__(f"injection table does not cover m <= {k}")


class StageOutOfRange(TruncationError):
    pass
