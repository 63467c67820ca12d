"""Keyword-controllable dialog response generation."""

__version__ = "0.1.0"
