"""Exception hierarchy, grouped by the CLI exit code that reports them."""


class FusionError(Exception):
    """Base class for all errors raised by this package."""


class CubeFormatError(FusionError):
    """Cube/CSV file is missing, malformed, truncated, or non-finite."""


class GeometryError(FusionError):
    """Shapes, band counts, or grid geometries are inconsistent."""


class NumericalError(FusionError):
    """A numerical procedure failed (rank deficiency, degenerate input)."""


class DivergenceError(NumericalError):
    """The iterative solver produced a non-finite iterate."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")
