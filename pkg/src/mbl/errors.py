"""Exception hierarchy shared by the solver modules."""


class MBLError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(MBLError, ValueError):
    """A saturation or parameter lies outside its admissible range."""

    exit_code = 3


class SingularityError(DomainError):
    """A constitutive law was evaluated at a singular point."""


class AnalysisError(MBLError, RuntimeError):
    """A travelling-wave computation failed (no root, no bracket, ...)."""

    exit_code = 3


class MeshError(MBLError, RuntimeError):
    """The mesh degenerated (zero-length interval or node crossing)."""

    exit_code = 4


class IntegrationError(MBLError, RuntimeError):
    """Time integration failed; ``state`` carries the last good state."""

    exit_code = 4

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConfigError(MBLError, ValueError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
