"""Exception types raised across the package."""


class DelegationError(Exception):
    """Base class for all errors raised by ibl_delegation."""


class UnreachableAfterRetries(DelegationError):
    """No connected wall layout was found within the attempt budget."""


class InsufficientOpenCells(DelegationError):
    """Not enough untagged open cells to place the requested error states."""


class NonMonotoneTime(DelegationError, ValueError):
    """An observation time precedes an existing observation of the same instance."""


class TimeParadox(DelegationError, ValueError):
    """Activation was requested at a time not strictly after every stored time."""


class EmptyActivations(DelegationError, ValueError):
    pass


class EmptyCandidates(DelegationError, ValueError):
    pass


class EmptyGroup(DelegationError, ValueError):
    pass


class ParseError(DelegationError, ValueError):
    """A document could not be parsed; the message names the line or field."""


class InvariantViolation(DelegationError, ValueError):
    """A loaded object is well formed but breaks a domain invariant."""


class KindMismatch(DelegationError, ValueError):
    """A snapshot holds a different kind of policy than the one requested."""
