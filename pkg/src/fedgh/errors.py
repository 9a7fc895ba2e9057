"""Exception types shared across the package."""


class FedGHError(Exception):
    """Base class for all package errors."""


class ConfigError(FedGHError, ValueError):
    """Invalid configuration: bad dimensions, infeasible settings, unknown keys."""


class InputError(FedGHError, ValueError):
    """Invalid runtime input such as an empty batch or an out-of-range label."""


class ProtocolError(FedGHError, RuntimeError):
    """A participant sent something the protocol cannot accept."""

    def __init__(self, message, client_id=None):
        super().__init__(message)
        self.client_id = client_id
