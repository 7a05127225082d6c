"""Pseudospectral laboratory for scaling-vector-field decay estimates of
anisotropic wave systems.

Subpackages by role:
  spectral_core   periodic offset grid, FFT derivatives, polar split, norms
  cutoffs         dyadic bumps, frequency projections, phase-set measures
  vectorfields    the scaling field S, commuted lattices, the operators L and F
  identities      degenerate Bochner identities and weighted inequalities
  solver          exact spectral propagator plus Strang-split cubic systems
  harness         diagnostics, decay fits, bootstrap monitoring, reporting
  kernels         numba fast paths with pure-numpy fallbacks
"""

__version__ = "0.1.0"

from .spectral_core import Grid, make_grid

__all__ = ["Grid", "make_grid", "__version__"]
