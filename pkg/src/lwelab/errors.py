"""Exception hierarchy shared by all lwelab modules.

Each error carries the process exit status the CLI reports for it.
"""


class LabError(Exception):
    """Base class for every error raised by lwelab."""

    kind = "error"
    exit_code = 1


class DomainError(LabError, ValueError):
    """An argument lies outside the domain of the operation."""

    kind = "domain_error"
    exit_code = 2


class UsageError(DomainError):
    """Invalid experiment configuration."""

    kind = "usage_error"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CapacityExceeded(LabError):
    """The requested instance is too large for exact desk-scale treatment."""

    kind = "capacity_exceeded"
    exit_code = 3


class UnsupportedModulus(LabError):
    """The routine needs a (odd) prime modulus."""

    kind = "unsupported_modulus"
    exit_code = 2


class InsufficientRank(LabError):
    """The sample matrix does not have full column rank."""

    kind = "insufficient_rank"


class VerifyFail(LabError):
    """No secret reproduces every sample exactly."""

    kind = "verify_fail"


class NumericalFailure(LabError):
    """An iterative method did not converge.

    ``trace`` holds the per-iteration convergence gap.
    """

    kind = "numerical_failure"
    exit_code = 4

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
