"""Measure and predict how constructive team discussions are."""

__version__ = "0.1.0"
