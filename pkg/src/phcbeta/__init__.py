"""Toolkit for extracting the beta-factor of emitters coupled to a W1 waveguide."""

__version__ = "0.1.0"
