"""Spectral geometry of closed loops: the curvature Schroedinger operator
``-d^2/ds^2 + kappa(s)^2``, its orbit reformulation, second-variation analysis
around elliptical and collapsed critical orbits, exact Gegenbauer spectra of
``-d^2/ds^2 + g sec^2 s``, and numerical probes of the bound ``e0 >= 1``.
"""

__version__ = "0.1.0"
