"""Soliton gases of the focusing NLS equation."""

__version__ = "0.1.0"
