"""Exception types shared across the library, mapped to CLI exit codes in toma.cli."""


class TomaError(Exception):
    """Base class for every error this library raises on purpose."""


class DataError(TomaError, ValueError):
    """Invalid shapes, values, flags-with-data conflicts, or file contents."""


class LayoutError(DataError):
    """Requested partition does not divide the token grid.

    Carries the nearest valid region counts so callers can suggest a fix.
    """

    def __init__(self, message: str, valid_regions: tuple[int, ...] = ()):
        self.valid_regions = tuple(int(v) for v in valid_regions)
        if self.valid_regions:
            shown = ", ".join(str(v) for v in self.valid_regions)
            message = f"{message} (valid region counts: {shown})"
        super().__init__(message)


class NumericalError(TomaError, ArithmeticError):
    """A numerical routine failed beyond the built-in recovery steps."""
