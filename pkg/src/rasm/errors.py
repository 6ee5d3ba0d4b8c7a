"""Shared exception types."""


class ParameterError(ValueError):
    """An argument violates its documented range, dimension, or domain."""


class CapacityError(ValueError):
    """Input exceeds a hard size guard of an enumeration-based routine."""


class ParseError(ValueError):
    """Malformed instance file."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", field {column}"
            where += ": "
        super().__init__(where + message)
