"""Numerical laboratory for a 2D viscous fluid coupled to a 1D viscoelastic beam.

Subpackages cover periodic field calculus, the subgraph change of variables,
the beam and reduced thin-film solvers, a transformed Stokes solver on the
reference rectangle, the divergence-free boundary lifting, the coupled
solver, and verifiers for the supporting functional inequalities.
"""

__version__ = "0.1.0"
