"""Movable-element IRS simulator and non-uniform DPS codebook toolkit."""

__version__ = "0.1.0"
