"""Charging-station control with contextual bandits on a surrogate distribution grid."""

from .errors import ConfigError, ContractError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ContractError", "__version__"]
