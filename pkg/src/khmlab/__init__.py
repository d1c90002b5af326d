"""Periodic-box EMHD and Hall-MHD lab for exact third-order laws."""

__version__ = "0.1.0"
