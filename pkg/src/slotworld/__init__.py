"""Object-centric video prediction with latent actions on a procedural grid world."""

__version__ = "0.1.0"
