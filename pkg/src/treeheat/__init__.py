"""Heat diffusion on homogeneous trees and the integers."""

__version__ = "0.1.0"
