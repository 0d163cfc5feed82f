"""Exception hierarchy shared across the toolkit."""


class TrunksimError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TrunksimError):
    """Invalid configuration, manifest, or precondition violation."""


class ValidationError(TrunksimError):
    """Input data failed validation (bad CSV row, out-of-range value...)."""


class GeometryError(TrunksimError):
    """Geometric input is unusable (open surface, self-intersection...)."""


class EmptyGeometryError(GeometryError):
    """The requested region contains no geometry."""


class DegenerateElementError(GeometryError):
    """A mesh element collapsed below the volume/area floor."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class ParseError(TrunksimError):
    """Malformed file content."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class FormatError(TrunksimError):
    """Structurally valid file with unsupported content."""


class ConvergenceError(TrunksimError):
    """Iterative procedure exhausted its budget."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


class SolverError(TrunksimError):
    """Linear or nonlinear solve failed."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(SolverError):
    """Non-finite state detected during time stepping."""


class CommandError(TrunksimError):
    """Unknown or malformed teleoperation command."""


class PlacementError(TrunksimError):
    """Sensor site could not be resolved on the mesh."""
