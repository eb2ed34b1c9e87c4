"""Exception hierarchy shared by the library and the command line front-end."""


class BosonPermError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for this failure."""

    exit_code = 1


class ValidationError(BosonPermError, ValueError):
    """Inputs violate a documented precondition (shapes, occupations, S invariants)."""

    exit_code = 2


class DimensionError(ValidationError):
    pass


class CapacityError(BosonPermError):
    """The requested evaluation exceeds the desk-scale size guard."""

    exit_code = 3


class NumericalConsistencyError(BosonPermError, ArithmeticError):
    """A quantity that must be real and non-negative came out otherwise."""

    exit_code = 4


class DegeneracyError(NumericalConsistencyError):
    pass
