"""Hawkes-process fitting from event times and interval-censored counts."""

__version__ = "0.1.0"
