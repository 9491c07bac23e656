"""Numerical verification of curvature identities on 3-quasi-Sasakian manifolds."""

__version__ = "0.1.0"
