"""Objective Bayesian and classical inference for the Rician distribution."""

__version__ = "0.1.0"
