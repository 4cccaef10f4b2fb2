"""Exception types shared across the package."""


class DrsoError(Exception):
    """Base class for all package errors."""


class NumericalFailure(DrsoError):
    """A numerical routine lost accuracy or exhausted its iteration budget."""


class FlatEllipsoid(NumericalFailure):
    """An ellipsoid update would exceed the shape-matrix condition guard."""


class InfeasibleMarginals(DrsoError):
    """A distribution handed to a transport computation does not sum to one."""


class AnchorMissing(DrsoError):
    """An asymmetric distance from the empty scenario was requested without an anchor."""


class TooLarge(DrsoError):
    """An enumeration would exceed its configured guard."""


GuardExceeded = TooLarge


class NotMonotone(DrsoError):
    """An operation needs monotone second-stage costs but the problem does not declare them."""


class OracleContractViolation(DrsoError):
    """An oracle returned a scenario that fails its own approximation guarantee."""


class EmptyGrid(DrsoError):
    """The geometric distance grid is empty because all distances are zero."""


class RoundingGuaranteeViolated(DrsoError):
    """A rounding certificate check failed."""


class ParseError(DrsoError):
    """An instance file could not be parsed."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
