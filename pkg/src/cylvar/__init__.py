"""Variational solvers for -Δu + (a/r²)u = f(x, u) on O(2)-invariant profiles and the
matching curl-curl problem for azimuthal vector fields.

Importing the package is cheap; numerical modules are imported on demand.
"""
__version__ = "0.1.0"
