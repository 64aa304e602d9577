"""Blow-up local model of a pseudo-Anosov boundary fixed point, boundary-map
verification, and the blown-up torus cat map."""

__version__ = "0.1.0"
