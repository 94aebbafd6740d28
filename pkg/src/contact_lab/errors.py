"""Exception types shared across the package."""


class ContactLabError(Exception):
    """Base class for all errors raised by contact_lab."""


class BudgetExceeded(ContactLabError):
    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(f"graph needs {required} vertices, budget is {budget}")


class NoSuchEdge(ContactLabError):
    pass


class Unreachable(ContactLabError):
    pass


class LambdaOutOfRange(ContactLabError):
    pass


class InvalidRate(ContactLabError):
    pass


class HorizonExceeded(ContactLabError):
    pass


class InitOutsideRegion(ContactLabError):
    pass


class StateSpaceTooLarge(ContactLabError):
    def __init__(self, n_states: int, cap: int):
        self.n_states = n_states
        super().__init__(f"state space has {n_states} states, cap is 2**{cap}")


class HypothesisViolated(ContactLabError):
    pass
