"""
Quasi-Langevin Lab

Quantum evolution of P(x, t) = |psi(x, t)|^2 and overdamped Brownian motion,
each written as a path integral and checked against its differential
equation, plus the semiclassical quasi-Langevin process whose noise is
weighted by the (non-positive) Airy functional, simulated with signed
weights and sign diagnostics.

Example:
    >>> from quasilangevin import RngStream, make_grid, make_time_grid
    >>> from quasilangevin import BrownianParams, InitialDistribution, harmonic, langevin_simulate
    >>> ens = langevin_simulate(
    ...     BrownianParams(), harmonic(), InitialDistribution(0.0, 0.5),
    ...     make_time_grid(0.0, 1.0, 100), 10_000, RngStream(seed=7),
    ... )
    >>> ens.terminal.shape
    (10000,)
"""

__version__ = "1.0.0"
__author__ = "Yeabwang"
__email__ = "wangxiayu@yeab.io"

from .brownian import (  # noqa: E402
    BrownianParams,
    InitialDistribution,
    PropagatorMatrix,
    TrajectoryEnsemble,
    brownian_pathintegral_propagator,
    fokker_planck_evolve,
    functional_form_simulate,
    langevin_simulate,
    noise_moment_check,
    path_action,
)
from .config import RunConfig, config_hash, defaults_for, parse_config, serialize_config  # noqa: E402
from .core import (  # noqa: E402
    Potential1D,
    RngStream,
    SpatialGrid,
    TimeGrid,
    cubic_perturbed_harmonic,
    harmonic,
    make_grid,
    make_time_grid,
    polynomial,
    potential_eval,
    quartic,
    quartic_perturbed_harmonic,
)
from .experiments import run_experiment  # noqa: E402
from .functionals import (  # noqa: E402
    SliceWeight,
    airy_ai,
    airy_ai_prime,
    airy_proposal_sample,
    airy_slice_weight,
    gaussian_path_weight,
)
from .io import compare_densities  # noqa: E402
from .quantum import (  # noqa: E402
    DensityMatrixXY,
    TransferKernel,
    WaveFunction,
    WignerState,
    density_matrix_transfer_kernel,
    evolve_schrodinger,
    make_gaussian_packet,
    probability_density,
    propagate_density_matrix_pathintegral,
    to_relative_frame,
    wigner_transform,
)
from .semiclassical import (  # noqa: E402
    PhiField,
    ProposalConfig,
    SignedEnsemble,
    classical_evolve,
    phi,
    quasi_langevin_simulate,
    ratio_estimate,
    sample_initial_conditions,
    sign_diagnostics,
)
from .utils import (  # noqa: E402
    AccuracyError,
    ConfigError,
    NumericalStabilityError,
    PositivityError,
    QuasiLangevinError,
    SignCollapseError,
    UsageError,
)

__all__ = [
    "AccuracyError",
    "BrownianParams",
    "ConfigError",
    "DensityMatrixXY",
    "InitialDistribution",
    "NumericalStabilityError",
    "PhiField",
    "PositivityError",
    "Potential1D",
    "PropagatorMatrix",
    "ProposalConfig",
    "QuasiLangevinError",
    "RngStream",
    "RunConfig",
    "SignCollapseError",
    "SignedEnsemble",
    "SliceWeight",
    "SpatialGrid",
    "TimeGrid",
    "TransferKernel",
    "TrajectoryEnsemble",
    "UsageError",
    "WaveFunction",
    "WignerState",
    "airy_ai",
    "airy_ai_prime",
    "airy_proposal_sample",
    "airy_slice_weight",
    "brownian_pathintegral_propagator",
    "classical_evolve",
    "compare_densities",
    "config_hash",
    "cubic_perturbed_harmonic",
    "defaults_for",
    "density_matrix_transfer_kernel",
    "evolve_schrodinger",
    "fokker_planck_evolve",
    "functional_form_simulate",
    "gaussian_path_weight",
    "harmonic",
    "langevin_simulate",
    "make_gaussian_packet",
    "make_grid",
    "make_time_grid",
    "noise_moment_check",
    "parse_config",
    "path_action",
    "phi",
    "polynomial",
    "potential_eval",
    "probability_density",
    "propagate_density_matrix_pathintegral",
    "quartic",
    "quartic_perturbed_harmonic",
    "quasi_langevin_simulate",
    "ratio_estimate",
    "run_experiment",
    "sample_initial_conditions",
    "serialize_config",
    "sign_diagnostics",
    "to_relative_frame",
    "wigner_transform",
]
