"""Workbench for lattice growth models: last-passage percolation, directed
polymers in random environment, and TASEP with spatially inhomogeneous rates.

Submodules
----------
specfun   log-gamma / digamma / trigamma / inverse digamma, scalar root finding
convex    Legendre transforms, infimal convolution, one-sided Cramer rates on grids
env       reproducible random environments and the piecewise-constant speed function
lattice   last-passage and log-partition dynamic programming, path sampling
loggamma  exactly solvable stationary polymer: Burke recursion, free energy,
          large-deviation rate functions and their duals
tasep     event-driven exclusion process, height/current bookkeeping, couplings
hydro     macroscopic limit shapes, variational formulas, density profiles,
          entropy-condition checks
mc        deterministic-parallel replica harness and statistics
cli       the ``growthlab`` experiment driver
"""

__version__ = "0.1.0"
