"""Euler, Milstein and multilevel Monte Carlo simulation of stochastic Volterra
equations with power-type kernels, plus reference values for testing them."""

from .errors import (
    CovarianceFailure,
    DivergenceError,
    InvalidArgument,
    MissingGradient,
    NoConvergence,
    OracleFailure,
    OutOfRange,
    SvolterraError,
    UnsupportedScheme,
)
from .estimators import AsianCall, McEstimate, Moment, TerminalCall, mc_estimate
from .euler import SchemePath, euler_batch, euler_path
from .grid import TimeGrid, eta, mesh, uniform_grid
from .kernels import PowerKernel, RateParams, cell_covariance, cell_integral, cell_l2_product, kernel_eval, rate_parameters
from .milstein import milstein_constant_k2_batch, milstein_path_constant_k2, milstein_path_state_free_sigma, milstein_state_free_batch
from .mlmc import MlmcConfig, MlmcResult, level_pair_estimate, mlmc_adaptive, mlmc_fixed_budget
from .models import SveModel, geometric_brownian, mech_langevin, rough_heston, scalar_sde, volterra_ou
from .noise import (
    IncrementTable,
    KernelGaussianFamily,
    NoiseConfig,
    aggregate_to_coarse,
    sample_increments,
    sample_kernel_cell_integrals,
)
from .rates import RateReport, complexity_experiment, strong_rate_experiment
from .reference import (
    MittagLefflerSeries,
    RiccatiSolution,
    fractional_adams_solve,
    gaussian_call,
    heston_call_fourier,
    heston_charfn,
    mittag_leffler_E,
    mittag_leffler_R,
    ou_terminal_moments,
)

__version__ = "0.1.0"
