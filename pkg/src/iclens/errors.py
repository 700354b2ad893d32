"""Exception hierarchy shared across the toolkit."""


class IclensError(Exception):
    """Base class for all toolkit errors."""


class FormatError(IclensError):
    """Malformed binary container or header."""


class LoadError(IclensError):
    """A referenced file is missing or unreadable."""


class ConsistencyError(IclensError):
    """Cross-file validation failed (ids, lengths, variants)."""


class DomainError(IclensError):
    """Arguments outside an operation's mathematical domain."""


class DataError(IclensError):
    """Dataset content is missing or contradicts its schema."""
