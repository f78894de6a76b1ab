"""Numerical laboratory for a decaying two-mode Bose-Hubbard system.

Exact many-particle propagation in the fixed-N Fock sector, the derived
mean-field dynamics (nonlinear Bloch flow / discrete nonlinear Schroedinger
form), fixed-point and bifurcation analysis on the Bloch sphere, and
experiment drivers that quantify mean-field vs. many-particle agreement.
"""

from .backend import BACKEND, NUMBA_ENABLED
from .params import (
    DEFAULT_ATOL,
    DEFAULT_MAX_STEPS,
    DEFAULT_RTOL,
    IntegrationError,
    ModelParams,
)
from .fock import (
    FockTrajectory,
    ManyParticleState,
    ObservableRecord,
    angular_momentum_matrices,
    build_hamiltonian,
    coherent_state,
    covariance,
    energy_expectation,
    evolve,
    factorization_check,
    heisenberg_residual,
    norm_decay_rate,
    observables,
    propagate,
)
from .meanfield import (
    BlochState,
    BlochTrajectory,
    SpinorState,
    SpinorTrajectory,
    bloch_from_spinor,
    bloch_rhs,
    gpe_rhs,
    integrate_bloch,
    integrate_gpe,
    spinor_from_bloch,
)
from .fixedpoints import (
    FixedPointRecord,
    MarginalParameterWarning,
    MarginalStabilityError,
    RegionLabel,
    bifurcation_scan,
    classify,
    fixed_points,
    index_sum_check,
    region,
)

__version__ = "0.1.0"
