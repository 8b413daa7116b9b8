"""Design, simulation and spectrum fitting for cavity-enhanced squeezed-vacuum sources."""

__version__ = "0.1.0"
