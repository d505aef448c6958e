"""Order-allocation optimization over the probability simplex.

Three routes to the cost-minimizing allocation:

* :func:`closed_form_allocation` — exact interior optimum for geometric
  batch laws, from the stationarity conditions of the Lagrangian
  ``cost + multiplier * (sum P - 1)``.
* :func:`numerical_allocation` — projected-gradient descent on the
  simplex for any batch law (analytic gradient when geometric, central
  finite differences otherwise).
* :func:`grid_oracle` — brute-force minimum over a simplex lattice,
  used as an independent check at small dimension.

Every route reports the same first- and second-order diagnostics: the
common multiplier recovered from the gradient at the optimum, the
worst-case stationarity residual, and the smallest diagonal Hessian
entry (positive means a strict local minimum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import _pg_geometric, _project_simplex, _project_simplex_weighted
from .errors import InfeasibleError, InteriorViolationError, NonConvergenceError
from .supply import (
    Allocation,
    SupplyChainInstance,
    _closed_form_q,
    _utilization_grid,
    cost_gradient,
    cost_hessian_diag,
    feasibility_lower_bounds,
    unit_cost,
)

METHOD_CLOSED_FORM = "closed_form"
METHOD_PROJECTED_GRADIENT = "projected_gradient"
METHOD_GRID_ORACLE = "grid_oracle"

_LATTICE_POINT_CAP = 20_000_000


def _require_price_incentive(inst: SupplyChainInstance) -> None:
    # a flat price (slope 0) makes every allocation equally good
    if not inst.price_slope < 0.0:
        raise ValueError("allocation optimization requires a strictly negative price slope")


@dataclass(frozen=True)
class OptimizeOptions:
    """Projected-descent controls (Armijo backtracking line search)."""

    tol: float = 1e-9          # stop when the unit-step projected-gradient norm drops below
    max_iters: int = 50_000
    armijo: float = 1e-4
    shrink: float = 0.5
    fd_step: float = 1e-6      # central-difference step for gradients
    fd_step_hessian: float = 1e-4


@dataclass(frozen=True, eq=False)
class AllocationResult:
    """An optimal allocation plus its optimality certificates."""

    P_star: Allocation
    cost_at_optimum: float
    kkt_multiplier: float    # common negated gradient component at the optimum
    B_constant: float        # 1 - 2 u multiplier / (slope * order_rate); NaN if not geometric
    kkt_residual: float      # max_i |grad_i + multiplier|
    hessian_min: float       # smallest diagonal Hessian entry (> 0 certifies a minimum)
    method: str

    def to_dict(self) -> dict:
        return {
            "P_star": self.P_star.P.tolist(),
            "cost_at_optimum": self.cost_at_optimum,
            "kkt_multiplier": self.kkt_multiplier,
            "B_constant": self.B_constant,
            "kkt_residual": self.kkt_residual,
            "hessian_min": self.hessian_min,
            "method": self.method,
        }


def _fd_dq(inst: SupplyChainInstance, P: np.ndarray, h: float) -> np.ndarray:
    """Finite-difference d q[i]/d P[i] for arbitrary batch laws.

    Warehouses are independent, so all coordinates are perturbed at once
    and resolved in two vectorized fixed-point solves. One-sided near the
    P[i] = 0 boundary.
    """
    up = np.minimum(P + h, 1.0)
    down = np.maximum(P - h, 0.0)
    q_up = _utilization_grid(inst, inst.order_rate * up)
    q_down = _utilization_grid(inst, inst.order_rate * down)
    return (q_up - q_down) / (up - down)


def _fd_hessian_diag(inst: SupplyChainInstance, P: np.ndarray, h: float) -> np.ndarray:
    q0 = _utilization_grid(inst, inst.order_rate * P)
    q_up = _utilization_grid(inst, inst.order_rate * (P + h))
    q_down = _utilization_grid(inst, inst.order_rate * np.maximum(P - h, 0.0))
    d2q = (q_up - 2.0 * q0 + q_down) / h**2
    return -inst.price_slope * inst.perish * d2q


def _diagnostics(inst: SupplyChainInstance, alloc: Allocation, method: str,
                 opts: OptimizeOptions) -> AllocationResult:
    state = unit_cost(inst, alloc)
    geometric = inst.batch.kind == "geometric"
    if geometric:
        grad = cost_gradient(inst, alloc)
        hess = cost_hessian_diag(inst, alloc)
    else:
        grad = -inst.price_slope * inst.perish * _fd_dq(inst, alloc.P, opts.fd_step)
        hess = _fd_hessian_diag(inst, alloc.P, opts.fd_step_hessian)
    multiplier = float(-grad.mean())
    residual = float(np.max(np.abs(grad + multiplier)))
    if geometric:
        b_const = 1.0 - 2.0 * inst.batch.u * multiplier / (inst.price_slope * inst.order_rate)
    else:
        b_const = float("nan")
    return AllocationResult(
        P_star=alloc,
        cost_at_optimum=state.unit_cost,
        kkt_multiplier=multiplier,
        B_constant=b_const,
        kkt_residual=residual,
        hessian_min=float(hess.min()),
        method=method,
    )


def closed_form_allocation(
    inst: SupplyChainInstance,
    opts: OptimizeOptions | None = None,
) -> AllocationResult:
    """Exact interior optimum for a geometric batch law.

    The stationarity conditions give

        P[i] = (sqrt(arrival[i] * perish[i]) / order_rate)
               * (order_rate + sum_j (perish[j] + arrival[j] * u))
               / sum_j sqrt(arrival[j] * perish[j])
               - (perish[i] + arrival[i] * u) / order_rate

    which sums to one identically. The formula assumes the optimum lies
    strictly inside the feasible region; when it does not (a coordinate at
    or below zero or below a stability lower bound), InteriorViolationError
    directs the caller to :func:`numerical_allocation`.
    """
    if inst.batch.kind != "geometric":
        raise ValueError("closed-form allocation requires a geometric batch law")
    _require_price_incentive(inst)
    opts = opts or OptimizeOptions()
    u = inst.batch.u
    weight = np.sqrt(inst.arrival * inst.perish)
    offset = inst.perish + inst.arrival * u
    share = weight / weight.sum()
    P = (share * (inst.order_rate + offset.sum()) - offset) / inst.order_rate
    total = float(P.sum())
    if abs(total - 1.0) > 1e-12:
        raise RuntimeError(f"closed-form allocation lost the simplex identity: sum={total!r}")
    bounds = feasibility_lower_bounds(inst)
    bad = np.flatnonzero((P <= 0.0) | (P <= bounds))
    if bad.size:
        raise InteriorViolationError(
            "closed-form optimum is not strictly interior at warehouse(s) "
            f"{bad.tolist()} (P={np.round(P, 6).tolist()}); use the numerical method",
            P_star=P,
        )
    return _diagnostics(inst, Allocation(P), METHOD_CLOSED_FORM, opts)


def _feasible_start(inst: SupplyChainInstance) -> np.ndarray:
    bounds = feasibility_lower_bounds(inst)
    slack = 1.0 - float(bounds.sum())
    if slack <= 1e-9:
        raise InfeasibleError(
            "no strictly feasible allocation: stability lower bounds sum to "
            f"{bounds.sum()!r}"
        )
    return bounds + slack / inst.n


def _pg_python(cost, grad, hess, P0, opts: OptimizeOptions):
    """Generic preconditioned projected-gradient loop; mirrors the kernel."""
    P = P0.copy()
    f = cost(P)
    g = grad(P)
    h = hess(P)
    iterations = 0
    while iterations < opts.max_iters:
        iterations += 1
        residual = float(np.max(np.abs(_project_simplex(P - g) - P)))
        if residual < opts.tol:
            return P, iterations, residual, True
        target = _project_simplex_weighted(P - g / h, h)
        if float(np.max(np.abs(target - P))) == 0.0:
            break
        t = 1.0
        while True:
            P_new = P + t * (target - P)
            f_new = cost(P_new)
            limit = f + opts.armijo * float(g @ (P_new - P))
            if limit == f:
                if f_new < np.inf:
                    break
            elif f_new <= limit:
                break
            t *= opts.shrink
            if t < 1e-20:
                return P, iterations, residual, False
        P, f = P_new, f_new
        g = grad(P)
        h = hess(P)
    residual = float(np.max(np.abs(_project_simplex(P - g) - P)))
    return P, iterations, residual, residual < opts.tol


def numerical_allocation(
    inst: SupplyChainInstance,
    opts: OptimizeOptions | None = None,
) -> AllocationResult:
    """Projected descent minimization of the unit cost on the simplex.

    Works for any batch law; starts from the uniform point lifted above the
    stability lower bounds. The cost is separable, so steps are
    preconditioned by the diagonal Hessian (exact when geometric, finite
    differences otherwise) with Armijo backtracking, and iteration stops
    when the unit-step projected-gradient norm falls below ``opts.tol``.
    Unlike the closed form this handles optima with active boundary
    constraints (the projection keeps iterates feasible).
    """
    opts = opts or OptimizeOptions()
    _require_price_incentive(inst)
    P0 = _feasible_start(inst)
    if inst.batch.kind == "geometric":
        with np.errstate(over="ignore"):
            P, iterations, residual, converged = _pg_geometric(
                inst.arrival, inst.perish, inst.order_rate, inst.batch.u,
                inst.price_slope, P0, opts.tol, opts.max_iters,
                opts.armijo, opts.shrink,
            )
    else:
        hi = 1.0 - 1e-9

        def cost(P):
            q = _utilization_grid(inst, inst.order_rate * P)
            if np.any(q >= hi):
                return np.inf
            return inst.price_slope * float((inst.arrival - q * inst.perish).sum())

        def grad(P):
            return -inst.price_slope * inst.perish * _fd_dq(inst, P, opts.fd_step)

        def hess(P):
            # finite-difference curvature can be noisy; keep it positive so
            # the preconditioner stays a descent metric
            return np.maximum(_fd_hessian_diag(inst, P, opts.fd_step_hessian), 1e-9)

        P, iterations, residual, converged = _pg_python(cost, grad, hess, P0, opts)
    if not converged:
        raise NonConvergenceError(
            f"projected gradient stalled at residual {residual!r} "
            f"after {iterations} iterations",
            iterations=iterations,
            residual=residual,
        )
    return _diagnostics(inst, Allocation(P), METHOD_PROJECTED_GRADIENT, opts)


def _simplex_lattice(n: int, resolution: int) -> np.ndarray:
    """All integer compositions of ``resolution`` into n parts, lexicographic."""
    if n == 1:
        return np.array([[resolution]], dtype=np.int64)
    if n == 2:
        k = np.arange(resolution + 1, dtype=np.int64)
        return np.column_stack([k, resolution - k])
    if n == 3:
        counts = resolution + 1 - np.arange(resolution + 1, dtype=np.int64)
        first = np.repeat(np.arange(resolution + 1, dtype=np.int64), counts)
        second = np.arange(first.size, dtype=np.int64) - np.repeat(
            np.cumsum(counts) - counts, counts
        )
        return np.column_stack([first, second, resolution - first - second])
    blocks = []
    for head in range(resolution + 1):
        tail = _simplex_lattice(n - 1, resolution - head)
        blocks.append(
            np.column_stack([np.full(tail.shape[0], head, dtype=np.int64), tail])
        )
    return np.vstack(blocks)


def grid_oracle(
    inst: SupplyChainInstance,
    resolution: int,
    opts: OptimizeOptions | None = None,
) -> AllocationResult:
    """Exhaustive minimum over the lattice {P[i] = k[i]/resolution}.

    Independent of every other optimization route: it evaluates the cost at
    all feasible lattice points (vectorized across the whole lattice) and
    returns the minimizer, with ties broken by lattice order. Limited to
    n <= 4 warehouses; the lattice grows combinatorially.
    """
    opts = opts or OptimizeOptions()
    _require_price_incentive(inst)
    if inst.n > 4:
        raise ValueError(f"grid oracle supports at most 4 warehouses, got {inst.n}")
    if resolution < 1:
        raise ValueError("resolution must be a positive integer")
    n_points = 1.0
    for j in range(1, inst.n):
        n_points *= (resolution + j) / j
    if n_points > _LATTICE_POINT_CAP:
        raise ValueError(
            f"lattice would hold ~{n_points:.2g} points; lower the resolution"
        )
    lattice = _simplex_lattice(inst.n, resolution)
    P = lattice / float(resolution)
    order_flow = inst.order_rate * P
    if inst.batch.kind == "geometric":
        q = _closed_form_q(inst.arrival, inst.perish, inst.batch.u, order_flow)
        feasible = np.all(q < 1.0, axis=-1)
    else:
        q = _utilization_grid(inst, order_flow)
        feasible = np.all(q < 1.0 - 1e-9, axis=-1)
    if not feasible.any():
        raise InfeasibleError("no feasible lattice point at this resolution")
    cost = np.where(
        feasible,
        inst.base_price
        + inst.price_slope * (inst.arrival - q * inst.perish).sum(axis=-1),
        np.inf,
    )
    best = int(np.argmin(cost))
    return _diagnostics(inst, Allocation(P[best]), METHOD_GRID_ORACLE, opts)


@dataclass(frozen=True, eq=False)
class SweepRow:
    """One row of a parameter sensitivity sweep."""

    value: float
    P_star: np.ndarray | None
    cost: float | None
    feasible: bool


def sensitivity_sweep(
    inst: SupplyChainInstance,
    target: str,
    index: int,
    values,
) -> list[SweepRow]:
    """Closed-form optimum as one arrival or perish rate sweeps a range.

    ``target`` is ``"arrival"`` or ``"perish"``. Swept values for which the
    closed form leaves the interior are flagged infeasible rather than
    aborting the sweep.
    """
    if not 0 <= index < inst.n:
        raise ValueError(f"index {index} out of range for {inst.n} warehouses")
    rows = []
    for value in np.asarray(values, dtype=np.float64):
        try:
            result = closed_form_allocation(inst.with_rate(target, index, float(value)))
        except InteriorViolationError:
            rows.append(SweepRow(float(value), None, None, False))
        else:
            rows.append(
                SweepRow(float(value), result.P_star.P, result.cost_at_optimum, True)
            )
    return rows
