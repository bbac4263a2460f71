"""Exception hierarchy shared across the toolkit.

The CLI maps these onto its exit-code contract: usage errors exit 1,
data errors exit 2, anything else exits 3.
"""


class SubtokError(Exception):
    """Base class for all toolkit errors."""


class UsageError(SubtokError):
    """Bad invocation: unknown flags, missing arguments, invalid combinations."""


class DataError(SubtokError):
    """Bad input data: unreadable files, malformed model files, invalid corpora."""
