"""Posterior matching feedback schemes: simulation and analysis."""
