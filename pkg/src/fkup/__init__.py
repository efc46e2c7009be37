"""Frenkel-Kontorova chain energies from the discrete chain to the sharp-interface limit."""

__version__ = "0.1.0"
