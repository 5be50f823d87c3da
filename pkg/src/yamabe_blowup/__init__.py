"""Numerical companion for boundary blow-up of the Yamabe problem with boundary.

The package builds the half-space bubble and its curvature corrector, the
reduced energy in the concentration parameter, and the asymptotic remainder
estimates, each paired with an independent numerical check.
"""

__version__ = "0.1.0"
