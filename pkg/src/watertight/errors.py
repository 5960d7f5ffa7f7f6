"""Exception types raised by the pipeline."""


class WatertightError(Exception):
    """Base class for all pipeline errors."""


class InputError(WatertightError):
    """Problem with user input (bad file, unusable geometry)."""


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyMesh(InputError):
    pass


class ZeroExtent(InputError):
    pass


class NoTriangles(WatertightError):
    pass


class MalformedSurface(WatertightError):
    """An internal contract on the extracted surface was violated."""
