"""Periodic multipeakon dynamics, collision continuation and transport-distance bounds."""

from .approx import CORPUS, SmoothPeriodicDatum, approx_error, get_datum, multipeakon_approx, total_mass
from .dynamics import (
    CollisionChart,
    CollisionEvent,
    CollisionRequired,
    EventInWindow,
    PeakonError,
    SingularChart,
    SolverConfig,
    Trajectory,
    UnsupportedInteraction,
    characteristic_flow,
    detect_collision,
    evolve,
    from_rescaled,
    hamiltonian,
    momentum,
    residual_check,
    rhs_regular,
    rhs_rescaled,
    to_rescaled,
)
from .kernel import PeakonState, chi, chi_prime, chi_tilde, energy, h1_distance, h1_norm, profile
from .metric import (
    TransportPlan,
    j_bounds,
    lower_bound_L1,
    optimize_plan,
    plan_cdf_match,
    transport_cost,
    upper_bound_H1,
)

__version__ = "0.1.0"
