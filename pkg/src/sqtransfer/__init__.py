"""Steady-state squeezing transfer in a driven atom-cavity-mechanics system."""

from .dynamics import (
    EvolveOptions,
    SolverMethod,
    SteadyStateOptions,
    evolve,
    ground_state,
    iter_evolve,
    steady_state,
)
from .liouvillian import (
    Liouvillian,
    build_liouvillian,
    coherent_pump_liouvillian,
    squeezed_bath_liouvillian,
)
from .model import SqueezedBathParams, SystemParams, fig2_params, fig4_params
from .observables import Quadrature, fidelity, partial_trace, quadrature_variance, wigner
from .operators import HilbertSpec, Subsystem
from .semiclassical import (
    SemiclassicalParams,
    analytic_variance_bath,
    analytic_variance_coherent,
    stability,
)

__version__ = "0.1.0"
