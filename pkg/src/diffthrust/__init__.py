"""Differential-thrust adaptive control of a transport aircraft without its vertical tail."""

__version__ = "0.1.0"
