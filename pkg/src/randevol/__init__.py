"""randevol: dissipative random evolutions in Hamiltonian representation.

Persistent random walks, telegrapher-type equations, and multi-velocity
Poisson walks become Hamiltonian systems after a time-dependent exponential
rescaling of their fields.  This package provides the periodic spectral
substrate (exact propagators, functional gradients, Poisson brackets), the
individual systems with their conserved-density families, a solver deciding
Hamiltonian representability of transition generators, and a CLI that runs
the whole suite with deterministic seeding and CSV reports.
"""

__version__ = "0.1.0"

from .fields import (ComponentBundle, Field, PeriodicGrid, exponential_rescale,
                     integrate, inner, random_band_limited, random_bundle)
from .operators import apply_operator
from .propagators import OperatorMatrix, exact_propagate, rk4_propagate
from .densities import QuadraticDensity, functional_gradient, poisson_bracket

__all__ = [
    "ComponentBundle", "Field", "PeriodicGrid", "OperatorMatrix",
    "QuadraticDensity", "apply_operator", "exact_propagate",
    "exponential_rescale", "functional_gradient", "integrate", "inner",
    "poisson_bracket", "random_band_limited", "random_bundle",
    "rk4_propagate", "__version__",
]
