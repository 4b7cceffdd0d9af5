"""Exception hierarchy shared by all modules."""


class DtsegError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(DtsegError, ValueError):
    pass


class CannotExpandError(DtsegError, ValueError):
    """The expanded square does not fit inside the bounds."""


class InfeasibleTilingError(DtsegError, RuntimeError):
    pass


class InfeasiblePlacementError(DtsegError, RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


class BackendFailure(DtsegError, RuntimeError):
    """A segmentation backend failed; ``diagnostics`` holds captured output."""

    def __init__(self, message, diagnostics=""):
        super().__init__(message)
        self.diagnostics = diagnostics


class RunError(DtsegError, RuntimeError):
    pass


class ManifestError(DtsegError, RuntimeError):
    pass
