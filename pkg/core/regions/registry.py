# core/regions/registry.py
from core.errors import UnknownProtocolError


class ProtocolRegistry:
    """
    Registry for protocol evaluators.

    Protocols register under their id (``DF-MABC``, ``MHMR-OUT``, ...)
    with a class decorator; scenarios look them up by the ids listed in
    their config.
    """

    _protocols = {}

    @classmethod
    def register(cls, name):
        """
        Register a protocol class by id.

        Args:
            name (str): Protocol id

        Returns:
            function: Decorator function
        """
        def decorator(protocol_class):
            protocol_class.name = name
            cls._protocols[name] = protocol_class
            return protocol_class
        return decorator

    @classmethod
    def get_protocol(cls, name):
        """
        Get a protocol evaluator by id.

        Args:
            name (str): Protocol id

        Returns:
            Protocol: A fresh evaluator instance

        Raises:
            UnknownProtocolError: If nothing is registered under ``name``
        """
        if name not in cls._protocols:
            raise UnknownProtocolError(
                f"No protocol registered for '{name}' (known: {', '.join(sorted(cls._protocols))})"
            )
        return cls._protocols[name]()

    @classmethod
    def names(cls):
        return sorted(cls._protocols)
