"""Finite-volume laboratory for nonlocal traffic conservation laws and their local limit."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError, DomainError, DomainExit, FitError, GridError, InvalidKernel, MaximumPrincipleViolation,
    NonlocalTrafficError, NumericalBlowup, PathOrderError, ResolutionError, ScaleError, StabilityError,
    SupportError, TruncationError, UnsupportedModel,
)
from .grid import Grid1D, Profile, l1_distance, mollify_defect, total_variation, tv_decomposition  # noqa: E402
from .kernel import (  # noqa: E402
    DiscreteKernel, KernelFamily, KernelSpec, convolve, discretize, exponential, piecewise_linear, uniform,
    uniform_dx_w, validate_kernel,
)
from .velocity import VelocityModel, flux, greenshields, kruzkov  # noqa: E402
from .nonlocal_solver import NonlocalRunConfig, solve, step  # noqa: E402
from .local_reference import LocalRunConfig, exact_riemann, godunov_flux, solve_local  # noqa: E402
from .characteristics import CharacteristicPath, mass_between, trace  # noqa: E402
from .diagnostics import (  # noqa: E402
    EntropyReport, RateReport, TestFunction, TVSeries, dissipation_bound_fit, entropy_residual,
    monotonicity_verdict, rate_fit, tv_series,
)
from .scenarios import (  # noqa: E402
    BuildingBlock, CounterexampleSpec, MonotoneRamp, RandomBV, Riemann, building_block, counterexample_datum,
    lemma55_datum, standard_datum,
)
from .trajectory import Trajectory  # noqa: E402
