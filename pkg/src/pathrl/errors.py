"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration file or argument violates its contract."""


class SchemaMismatchError(ConfigError):
    """Data and schema disagree (unknown feature, wrong width, bad label)."""


class ProtocolError(RuntimeError):
    """An operation was called in a state that forbids it (e.g. step after terminal)."""


class ParseError(ValueError):
    """A file could not be parsed; carries the offending position."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
