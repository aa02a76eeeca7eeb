"""Exception types raised across the package."""


class DegenerateCircuitError(ValueError):
    """A circuit has nothing to build an estimation circuit from."""


class SingularityError(ArithmeticError):
    """An estimator would divide by (numerically) zero."""


class QubitLimitError(RuntimeError):
    """Dense simulation requested above the configured qubit cap."""
