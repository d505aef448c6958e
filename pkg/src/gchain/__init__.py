"""Queueing-network analytics for perishable-goods supply chains.

Stationary analysis of batch-removal queueing networks, closed-form and
numerical order-allocation optimization, and a discrete-event simulator
that validates every analytic quantity. See the README for the model and
the CLI.
"""

from ._accel import NUMBA_ENABLED
from .allocate import (
    AllocationResult,
    OptimizeOptions,
    SweepRow,
    closed_form_allocation,
    grid_oracle,
    numerical_allocation,
    sensitivity_sweep,
)
from .batch import BatchDistribution, generating_function, removal_factor
from .errors import (
    GChainError,
    InfeasibleError,
    InteriorViolationError,
    ModelFileError,
    NonConvergenceError,
    UnstableError,
)
from .gnet import (
    GNetwork,
    SolverOptions,
    TrafficSolution,
    solve_traffic,
    stationary_probability,
)
from .modelfile import ModelFile, load_model, parse_model
from .simulate import (
    ComparisonReport,
    SimConfig,
    SimEstimates,
    compare_to_analytic,
    simulate,
    write_histogram_csv,
)
from .supply import (
    Allocation,
    SteadyState,
    SupplyChainInstance,
    cost_gradient,
    cost_hessian_diag,
    dq_dP,
    expected_sale,
    expected_sale_conditional,
    feasibility_lower_bounds,
    unit_cost,
    utilization_fixed_point,
    utilization_geometric_closed_form,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "__version__",
    "AllocationResult",
    "OptimizeOptions",
    "SweepRow",
    "closed_form_allocation",
    "grid_oracle",
    "numerical_allocation",
    "sensitivity_sweep",
    "BatchDistribution",
    "generating_function",
    "removal_factor",
    "GChainError",
    "InfeasibleError",
    "InteriorViolationError",
    "ModelFileError",
    "NonConvergenceError",
    "UnstableError",
    "GNetwork",
    "SolverOptions",
    "TrafficSolution",
    "solve_traffic",
    "stationary_probability",
    "ModelFile",
    "load_model",
    "parse_model",
    "ComparisonReport",
    "SimConfig",
    "SimEstimates",
    "compare_to_analytic",
    "simulate",
    "write_histogram_csv",
    "Allocation",
    "SteadyState",
    "SupplyChainInstance",
    "cost_gradient",
    "cost_hessian_diag",
    "dq_dP",
    "expected_sale",
    "expected_sale_conditional",
    "feasibility_lower_bounds",
    "unit_cost",
    "utilization_fixed_point",
    "utilization_geometric_closed_form",
]
