"""Desk-scale LWE cryptanalysis, quantum-sample simulation and noise bounds."""

__version__ = "0.1.0"
