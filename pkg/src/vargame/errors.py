"""Exception types shared across the package."""


class CaseError(ValueError):
    """A grid case file or GridCase value violates the schema or an invariant."""


class StiffnessError(ArithmeticError):
    """The stiffness computation is numerically unusable (singular or ill-conditioned)."""


class CapacityError(RuntimeError):
    """An enumeration would exceed the configured size cap; use the evolutionary solver."""


class SupportOverflowError(CapacityError):
    """Too many fractional-probability loads for exact outcome enumeration; use Monte Carlo."""
