"""Exception hierarchy shared by every privshard module."""


class PrivshardError(Exception):
    """Base class for all library errors."""


class CatalogError(PrivshardError):
    """A pattern or catalog file is malformed."""


class LabelSequenceError(PrivshardError, RuntimeError):
    """An IOB sequence violates the B/I continuation rule. Should be unreachable."""


class AuthenticationError(PrivshardError):
    """Ciphertext failed authentication (wrong key or tampered bytes)."""


class AuthorizationError(PrivshardError):
    """Caller's key bundle does not belong to this store, or no keys were given."""


class KeyFileError(PrivshardError):
    """Key file is missing, unreadable or the wrong size."""


class StoreStateError(PrivshardError):
    """Operation not allowed in the store's current phase (building vs finalized)."""


class NotFoundError(PrivshardError, KeyError):
    """Unknown document id or entity ordinal."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class BenchRefused(PrivshardError):
    """Benchmark configuration exceeds the memory budget."""
