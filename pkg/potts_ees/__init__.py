"""Equi-energy and Metropolis sampling on the mean-field Potts model, with exact lumped-chain analysis."""

__version__ = "0.1.0"
