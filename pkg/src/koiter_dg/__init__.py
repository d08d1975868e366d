"""Mixed discontinuous Galerkin finite elements for Koiter shell bending."""

__version__ = "0.1.0"
