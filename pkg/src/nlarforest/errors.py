"""Exception types shared across the package."""


class NlarForestError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(NlarForestError, ValueError):
    """A parameter combination or config file is invalid."""


class SimulationError(NlarForestError, RuntimeError):
    """The autoregressive recursion produced a non-finite value."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EstimationError(NlarForestError, RuntimeError):
    """A Monte-Carlo estimate could not be formed (e.g. zero hits in a leaf)."""


class ModelError(NlarForestError, ValueError):
    """A noise model violates an assumption required by the requested operation."""
