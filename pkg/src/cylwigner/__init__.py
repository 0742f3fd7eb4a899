"""Wigner functions, star product, dynamics and tomography on the cylinder S^1 x Z."""

from .cyl_core import (
    AngleGrid,
    CylDensity,
    CylState,
    DisplacementLabel,
    Window,
    WindowOverflowError,
    density_from_pure,
    displace,
    displacement_matrix,
    momentum_eigenstate,
    parity_reflect,
    superposition,
)
from .special_fn import coherent_state, fiducial_state, theta3, theta3_norm
from .wigner_map import (
    NumericalValidationError,
    ResolutionError,
    WignerGrid,
    density_from_wigner,
    marginal_angle,
    marginal_momentum,
    quantizer_matrix,
    traciality,
    wigner_grid,
    wigner_point,
)
from .star_moyal import (
    BandLimitError,
    CylSymbol,
    SeriesConvergenceError,
    apply_correspondence,
    delta_ell_shift,
    moyal_bracket,
    operator_of,
    star_product,
    symbol_of,
)
from .dynamics import (
    BoundaryLeakError,
    PendulumConfig,
    StepSizeError,
    Trajectory,
    classical_trajectory,
    evolve_schrodinger,
    evolve_semiclassical,
    evolve_wigner_transport,
    hamiltonian_matrix,
)
from .tomography import (
    CharCoeffs,
    CoverageError,
    TomogramSet,
    char_coeff_zero,
    density_from_char,
    reconstruct_char,
    simulate_tomograms,
    wigner_from_char,
)

__version__ = "0.1.0"
