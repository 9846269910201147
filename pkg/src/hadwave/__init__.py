"""Numerical Hadamard-parametrix toolkit for wave and Dirac operators on
vector bundles over Lorentzian coordinate charts.

Subpackages:
  geometry   - metrics, geodesics, normal coordinates, world function
  bundle     - bundle data, wave/Dirac operators, gamma matrices
  hadamard   - transport coefficients, regularized kernels, Riesz pairings
  microlocal - wavefront-set estimation and null-flow predictions
  scaling    - dilations and short-distance scaling limits
  cli        - configuration-driven command line entry point
"""

__version__ = "0.1.0"
