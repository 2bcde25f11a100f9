from .beltrami import (
    BeltramiEquilibrium,
    BifurcatedBranch,
    BifurcationDirection,
    HarmonicField,
    HodgeParts,
    beltrami_solve,
    bifurcated_branch,
    bifurcation_direction,
    cross_helicity,
    curl_residual,
    field_energy,
    helicity,
    hodge_decompose,
    shooting_solve,
)
from .geometry import SlabGeometry
from .resonance import KernelElement, build_kernel_element, casimir_pairing, find_resonant_surface
from .spectral import (
    CurlSpectrum,
    ModeField,
    ModeSpace,
    ZeroModeSpace,
    curl_eigensolve,
    curl_matrix,
    lowest_positive_eigenvalue,
)

__all__ = [
    "BeltramiEquilibrium", "BifurcatedBranch", "BifurcationDirection", "HarmonicField", "HodgeParts",
    "beltrami_solve", "bifurcated_branch", "bifurcation_direction", "cross_helicity",
    "curl_residual", "field_energy", "helicity", "hodge_decompose", "shooting_solve",
    "SlabGeometry", "KernelElement", "build_kernel_element", "casimir_pairing",
    "find_resonant_surface", "CurlSpectrum", "ModeField", "ModeSpace", "ZeroModeSpace",
    "curl_eigensolve", "curl_matrix", "lowest_positive_eigenvalue",
]
