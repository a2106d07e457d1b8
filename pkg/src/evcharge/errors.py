class ContractError(ValueError):
    """Raised when a caller violates an operation's preconditions."""


class ConfigError(ValueError):
    """Raised for invalid scenario configuration, before any simulation runs."""
