"""Shared error types.

Every failure that can cross a module or wire boundary carries a short
machine-readable code (e.g. ``DUPLICATE_OID``, ``ERR AUTH`` maps from
``AUTH``) plus a human-readable message.  The wire layer turns any
:class:`HomeError` into an ``ERR <code>`` response line.
"""


class HomeError(Exception):
    """Failure with a machine-readable code."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.detail = message


class ParseError(HomeError):
    """Syntax error in scenario/rule/wire text, with position info."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__("PARSE_ERROR", where + message)
        self.line = line
