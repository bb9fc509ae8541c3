"""calib7: numerics for G2 calibrations, coassociative cones and their CR geometry."""

__version__ = "0.3.0"
