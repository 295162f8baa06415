"""Shared exception base class; concrete errors live next to the code that raises them."""


class ChartsumError(Exception):
    """Base class for all errors raised by this package."""
