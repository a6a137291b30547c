"""Memento datetime negotiation for versioned wiki pages."""

__version__ = "0.1.0"
