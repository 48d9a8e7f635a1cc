"""Contextuality tests for finite sets of quantum states under nonlinear dynamics."""

__version__ = "0.1.0"
