"""Rearrangements of grid-sampled functions and numerical checks of gradient estimates.

Modules
-------
grid          domains, grid functions, RGRID files
rearrange     distribution function, u*, Schwarz symmetrization, RPROF files
geometry      gradients, energies, level-set perimeters, isoperimetric constants
inequalities  verifiers returning InequalityReport records, the counterexample runner
orlicz        N-functions, Luxemburg norms and the Orlicz-Sobolev estimates
cli           the ``rearrange`` command
"""

from .errors import DomainError, FormatError, RangeError, RearrangementError, SingularSampleError
from .grid import BallDomain, Domain, GridFunction, make_domain, read_grid, sample, write_grid
from .rearrange import (
    RadialFunction,
    StepProfile,
    decreasing_rearrangement,
    distribution,
    read_profile,
    schwarz,
    write_profile,
)

__version__ = "0.1.0"

__all__ = [
    "BallDomain",
    "Domain",
    "DomainError",
    "FormatError",
    "GridFunction",
    "RadialFunction",
    "RangeError",
    "RearrangementError",
    "SingularSampleError",
    "StepProfile",
    "decreasing_rearrangement",
    "distribution",
    "make_domain",
    "read_grid",
    "read_profile",
    "sample",
    "schwarz",
    "write_grid",
    "write_profile",
]
