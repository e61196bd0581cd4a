"""Exception hierarchy shared by every module."""


class CKLError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(CKLError, ValueError):
    pass


class SingularityError(CKLError, ArithmeticError):
    pass


class DegenerateError(CKLError, ArithmeticError):
    pass


class NoConvergenceError(CKLError, RuntimeError):
    pass


class SingularJacobianError(CKLError, ArithmeticError):
    pass


class EmptyFamilyError(CKLError, ValueError):
    pass


class MemoryBudgetError(CKLError, MemoryError):
    """Raised when a lattice would exceed the configured cell cap."""


# the CLI reports budget failures under this name
BudgetError = MemoryBudgetError


class DegenerateFitError(CKLError, ValueError):
    pass


class PreconditionError(CKLError, ValueError):
    pass


class ZeroPolynomialError(CKLError, ValueError):
    pass


class NyquistError(CKLError, ValueError):
    pass


class ConfigError(CKLError, ValueError):
    pass
