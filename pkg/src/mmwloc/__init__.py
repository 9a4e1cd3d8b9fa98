"""mmWave multipath simulation and single-anchor 3D localization toolkit."""

__version__ = "0.1.0"
