"""Exception types raised across the package."""


class LinqsParseError(ValueError):
    """A line of a LINQS file could not be parsed."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class LinqsFormatError(LinqsParseError):
    """Lines of a content file disagree on the attribute count."""


class NumericalError(RuntimeError):
    """A numerical routine produced non-finite values or failed to factorize."""

    def __init__(self, message, **details):
        self.details = details
        if details:
            extra = ", ".join(f"{k}={v!r}" for k, v in details.items())
            message = f"{message} ({extra})"
        super().__init__(message)


class ConvergenceError(NumericalError):
    """An inner solver hit its iteration cap."""
