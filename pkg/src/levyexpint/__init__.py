"""Simulation and verification of exponential integrals of Levy-type processes."""

__version__ = "0.1.0"
