"""Exception types raised across the package."""


class HflcError(Exception):
    """Base class for all package errors."""


class ArityError(HflcError, ValueError):
    """Input vector length does not match the number of declared inputs."""


class PartitionError(HflcError, ValueError):
    """Invalid universe partition or input grouping."""


class CountOverflowError(HflcError, OverflowError):
    """A rule count exceeds the representable or materializable range."""


class UnsupportedKindError(HflcError, ValueError):
    """Operation not defined for this membership function kind."""


class ZeroFiringError(HflcError, ArithmeticError):
    """No rule fires for an input; the input lies outside the covered universe.

    ``row`` is the offending data row (if known) and ``node`` the hierarchy
    node id (if raised during hierarchy evaluation).
    """

    def __init__(self, message, row=None, node=None):
        super().__init__(message)
        self.row = row
        self.node = node


class DivergenceError(HflcError, ArithmeticError):
    """Training produced a non-finite error measure."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ReachabilityError(HflcError, ValueError):
    """An ankle target lies outside the reach of the two-link leg."""

    def __init__(self, message, phase=None):
        super().__init__(message)
        self.phase = phase


class SignalError(HflcError, KeyError):
    """Unknown signal id or signal not available to a controller."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class HierarchyError(HflcError, ValueError):
    """Malformed hierarchy wiring (forward references, bad sources)."""
