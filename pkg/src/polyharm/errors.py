"""Exception hierarchy shared by all polyharm modules.

Exit codes follow the CLI contract: parameter/precondition problems map
to 2, convergence or resolution failures to 3, violated invariants to 4.
"""


class PolyharmError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParameterError(PolyharmError):
    """A precondition on user-supplied parameters is violated."""

    exit_code = 2


class DomainError(ParameterError):
    """A point lies outside the (closed) unit ball."""


class SingularPointError(ParameterError):
    """Kernel evaluation requested at (or too close to) the diagonal x = y."""


class NotApplicableError(ParameterError):
    """Operation invoked outside its parameter regime (wrong case/regime)."""


class ConvergenceError(PolyharmError):
    """An iteration failed to converge; carries the last residual."""

    exit_code = 3

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ResolutionError(PolyharmError):
    """The grid cannot resolve the requested quantity (e.g. no cone nodes)."""

    exit_code = 3


class InvariantViolation(PolyharmError):
    """A validated internal invariant failed; results are not trustworthy."""

    exit_code = 4


USAGE_EXIT = 64
