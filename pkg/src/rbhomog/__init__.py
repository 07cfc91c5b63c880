"""Homogenization of coupled Riesz-Bessel kinetic systems with LRD initial data."""

__version__ = "0.1.0"
