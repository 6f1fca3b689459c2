"""Heat kernels of the sub-Laplacian on the CR hyperbolic space of real dimension 2n+1."""
from .core import (
    ConvergenceError, CylPoint, DomainError, EvalContext, EvalResult, Flag, QuadSpec, RegimeError,
    Space, acosh_safe, canonical_theta, measure_density,
)
from .distance import (
    AsymptoticConstants, DistanceRegime, DistanceValue, PhiSolution, an_bn_constants, asym_axis,
    asym_diagonal, asym_general, asym_vertical, f_second_derivative, phi_solve, sr_distance,
)
from .jet import Jet
from .riemannian import q_exact, q_integral, q_small_time
from .subelliptic import WrapSpec, log_p_cover, p_compact, p_cover, p_cover_double, p_cover_many
from .verification import (
    HistogramGrid, McConfig, McSamples, ResidualReport, mc_compare, mc_simulate,
    normalization_check, pde_residual,
)

__all__ = [name for name in dir() if not name.startswith("_")]
