"""Tile-map refinement network for the mmwloc pipeline."""

__version__ = "0.1.0"
