class CMDPToolkitError(Exception):
    """
    Base class for exceptions
    """

    pass


class ModelValidationError(CMDPToolkitError):
    """
    A model, or the file it was loaded from, violates the CMDP invariants.
    `violations` holds the individual messages.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class InvalidArgumentError(CMDPToolkitError, ValueError):
    """
    Class for precondition failures of the numerical routines
    """

    pass


class InfeasibleProblemError(CMDPToolkitError):
    pass


class SlaterConditionError(InfeasibleProblemError):
    """
    The supplied Slater policy is not strictly feasible.
    """

    def __init__(self, message, slack=None):
        super().__init__(message)
        self.slack = slack


class SolverError(CMDPToolkitError):
    """
    Class for internal solver failures (singular systems, unbounded LPs, pivot limits)
    """

    pass


class RateFitError(InvalidArgumentError):
    pass
