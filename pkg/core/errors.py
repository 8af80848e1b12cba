# core/errors.py
"""
Error taxonomy for relaynet.

Every error derives from ValueError so callers that only care about
"bad input" can keep catching ValueError.
"""


class RelayNetError(ValueError):
    """Base class for all relaynet errors."""


class CapacityDomainError(RelayNetError):
    """Raised when C(x) is evaluated outside [0, inf)."""


class DegenerateGeometryError(RelayNetError):
    """Raised when two nodes share a position or a geometry is malformed."""


class UnboundedRegionError(RelayNetError):
    """Raised when a weighted rate objective has no finite maximum."""


class EnumerationLimitError(RelayNetError):
    """Raised when an exhaustive enumeration would exceed its cap."""


class InsufficientBlocksError(RelayNetError):
    """Raised when a schedule is requested with fewer blocks than relays."""


class ProtocolUndefinedError(RelayNetError):
    """Raised when a protocol is requested for a relay count it does not support."""


class UnknownProtocolError(RelayNetError):
    """Raised when a protocol id is not registered or not tabulated."""


class ConfigError(RelayNetError):
    """Raised when a scenario configuration is invalid."""
