"""Exception hierarchy shared by the package."""


class BopcoError(Exception):
    """Base class for all errors raised by bopco."""


class ModelError(BopcoError):
    """A model file is malformed or violates a model invariant."""


class InfeasibleError(BopcoError):
    """A part cannot be packed into any compatible stock."""


class InvalidPackingError(BopcoError):
    """A packing or cut order does not separate its stock into the placed parts."""


class EGraphError(BopcoError):
    """Illegal e-graph operation (dead class, key mismatch, protected removal)."""


class DecodeError(BopcoError):
    """A genome cannot be decoded into a finite term."""


class BudgetExceeded(BopcoError):
    """An exhaustive enumeration would exceed its configured budget."""


class InvariantViolation(BopcoError):
    """An internal consistency audit failed."""
