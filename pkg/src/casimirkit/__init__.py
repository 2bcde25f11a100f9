"""Casimir invariants of noncanonical Hamiltonian systems: detection, canonization, unfreezing.

Subpackages and modules:

* :mod:`casimirkit.poisson` - Poisson operators, brackets, Casimirs, evolution, equilibria.
* :mod:`casimirkit.canonize` - Darboux reduction and minimal canonical extension.
* :mod:`casimirkit.guiding_center` - guiding-centre hierarchy and density laws.
* :mod:`casimirkit.slab` - slab curl spectra, Beltrami fields, resonant kernel elements.
* :mod:`casimirkit.tearing` - linearized ideal MHD, unfrozen tearing dynamics, stability.
"""

from .errors import (
    CasimirKitError,
    ConditioningError,
    ConfigError,
    DegenerateEquilibrium,
    DivergenceError,
    DomainError,
    EvaluationError,
    NoBranchError,
    NonConvergenceError,
    NoResonance,
    PlacementError,
    ResonantMultiplierError,
)
from .integrate import Trajectory, integrate
from .poisson import (
    PoissonOperator,
    PoissonSystem,
    ScalarObservable,
    bracket,
    energy_casimir_shift,
    evolve,
    find_equilibrium,
    jacobi_residual,
    kernel_basis,
    verify_casimir,
)

__version__ = "0.1.0"

__all__ = [
    "CasimirKitError", "ConditioningError", "ConfigError", "DegenerateEquilibrium",
    "DivergenceError", "DomainError", "EvaluationError", "NoBranchError",
    "NonConvergenceError", "NoResonance", "PlacementError", "ResonantMultiplierError",
    "Trajectory", "integrate", "PoissonOperator", "PoissonSystem", "ScalarObservable",
    "bracket", "energy_casimir_shift", "evolve", "find_equilibrium", "jacobi_residual",
    "kernel_basis", "verify_casimir", "__version__",
]
