"""Randomized data for nonlinear Schrodinger equations with confining potentials.

Spectral bases, Sobolev and Strichartz norms, random multipliers, a Picard
solver for the Duhamel formulation, the lens transform, and the smoothing
versus projector-decay comparison.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
