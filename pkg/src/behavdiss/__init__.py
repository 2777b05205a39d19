"""Dissipativity certificates for possibly uncontrollable linear behaviors."""

__version__ = "0.1.0"
