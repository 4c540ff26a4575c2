"""Exception types shared across the package."""


class SkelevoError(Exception):
    """Base class for all package-specific errors."""


class InputError(SkelevoError):
    """Unreadable, malformed, or inconsistent input data (CLI exit code 1)."""


class GenerationError(SkelevoError):
    """A synthetic growth script produced invalid geometry."""
