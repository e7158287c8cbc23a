"""FFT-based periodic homogenization of pixelized composite microstructures.

Solves the periodic cell problem on regular pixel grids by a fixed-point
iteration on the Lippmann-Schwinger equation, for linear elastic and
J2-elastoplastic phases under generalized plane strain, and extracts
effective properties (transverse Young's modulus, flow stress, hardening
modulus) from the macroscopic response.
"""

from .analysis import (
    EnsembleStats,
    OverallCurve,
    dilute_fiber_oracle,
    ensemble,
    flow_stress,
    hardening_modulus,
    laminate_oracle,
    voigt_reuss_young_bounds,
    write_curve_csv,
    young_modulus,
)
from .green_operator import (
    GreenApplyPlan,
    IsotropicModuli,
    acoustic_tensor,
    apply_green_field,
    compliance_apply,
    gamma_from_acoustic,
    gamma_hat,
    stiffness_apply,
)
from .material import (
    HardeningCurve,
    MaterialLaw,
    PointState,
    evaluate_stress,
    h_inverse,
    radial_return,
)
from .microstructure import (
    FiberSpec,
    PhaseMap,
    hexagonal_lattice,
    load_phase_image,
    percolates,
    random_fibers,
    save_phase_map,
    square_lattice,
)
from .solver import (
    CellProblem,
    CellState,
    ConvergenceError,
    LoadingProgram,
    SolverConfig,
    convergence_error,
    macro_strain_update,
    reference_medium,
    run_program,
    solve_elastic,
    solve_step_nonlinear,
    strain_ramp_program,
    uniaxial_direction,
    uniaxial_stress_program,
)
from .spectral import (
    FrequencyGrid,
    HighestFrequencyMask,
    forward,
    frequency_grid,
    highest_frequency_mask,
    inverse,
)
from .tensor_field import (
    GridSpec,
    ScalarField,
    SymTensorField,
    double_contract,
    equivalent_strain,
    field_average,
    sym_tensor,
    von_mises,
)

__version__ = "0.1.0"
