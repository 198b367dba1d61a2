"""Exception taxonomy shared across the package."""


class RegimeError(ValueError):
    """A precondition on the mathematical regime is violated.

    The message names the violated inequality so callers (and the CLI)
    can report exactly which hypothesis failed.
    """


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""
