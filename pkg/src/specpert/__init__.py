"""Spectral perturbation toolkit.

Finite discretizations of Schrodinger operators H(beta) = H0 + sum_i beta_i V_i
with many coupling parameters: support-family geometry, Stummel-class norms,
relative-bound estimates, Riesz projectors and analytic eigenvalue tracking.
"""

__version__ = "0.1.0"
