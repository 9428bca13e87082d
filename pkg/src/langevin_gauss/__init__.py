"""Small-noise Langevin dynamics and their Gaussian approximation."""
__version__ = "0.1.0"
