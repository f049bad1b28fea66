"""Anisotropic threshold dynamics for free particles and particles on a substrate."""

from . import anisotropy, grid, kernels, obstacle, twophase
from .errors import AnithreshError

__all__ = ["anisotropy", "grid", "kernels", "obstacle", "twophase", "AnithreshError"]
__version__ = "0.1.0"
