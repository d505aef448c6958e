"""N-warehouse perishable-goods supply model.

Each warehouse i receives objects as a Poisson stream (rate ``arrival[i]``),
loses the object at the head of its queue to perishing at exponential rate
``perish[i]`` while stocked, and serves a share ``P[i]`` of one common
Poisson order stream of rate ``order_rate``. An order asks for a random
batch of R objects and takes ``min(R, stock)``; an order hitting an empty
warehouse takes nothing. Warehouses are independent (no transfers), so the
utilization of each solves a scalar version of the traffic equations:

    q = arrival / (perish + order_rate * P * (1 - F(q)) / (1 - q))

The per-object purchase price is ``base_price + price_slope * (total
objects bought per unit time)`` with a negative slope: buying more lowers
the price. With a geometric batch law the fixed point collapses to a
quadratic with the stable root

    q = A - sqrt(A**2 - arrival / (perish * u)),
    A = (order_rate * P + perish + arrival * u) / (2 * u * perish)

which this module evaluates in a cancellation-free rearrangement, along
with its exact first and second derivatives in P.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .batch import BatchDistribution, generating_function, removal_factor
from .errors import UnstableError
from .gnet import GNetwork, SolverOptions, solve_traffic

_SIMPLEX_TOL = 1e-12
_FLOW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SupplyChainInstance:
    """Rates, batch law and price parameters of an N-warehouse chain."""

    arrival: np.ndarray       # object arrival rate per warehouse, > 0
    perish: np.ndarray        # perish rate per warehouse, > 0
    order_rate: float         # total order arrival rate, > 0
    batch: BatchDistribution  # law of the requested batch size, shared by orders
    base_price: float         # price per object at zero volume
    price_slope: float        # price change per unit purchase rate, < 0

    def __post_init__(self):
        arrival = np.atleast_1d(np.asarray(self.arrival, dtype=np.float64)).copy()
        perish = np.atleast_1d(np.asarray(self.perish, dtype=np.float64)).copy()
        if arrival.ndim != 1 or perish.shape != arrival.shape:
            raise ValueError("arrival and perish must be 1-d vectors of equal length")
        if np.any(arrival <= 0.0) or np.any(perish <= 0.0):
            raise ValueError("arrival and perish rates must be strictly positive")
        if not self.order_rate > 0.0:
            raise ValueError(f"order_rate must be strictly positive, got {self.order_rate!r}")
        # zero slope gives a flat (degenerate) price; optimization requires < 0
        if not self.price_slope <= 0.0:
            raise ValueError(f"price_slope must be <= 0, got {self.price_slope!r}")
        if not isinstance(self.batch, BatchDistribution):
            raise ValueError("batch must be a BatchDistribution")
        arrival.flags.writeable = False
        perish.flags.writeable = False
        object.__setattr__(self, "arrival", arrival)
        object.__setattr__(self, "perish", perish)
        object.__setattr__(self, "order_rate", float(self.order_rate))
        object.__setattr__(self, "base_price", float(self.base_price))
        object.__setattr__(self, "price_slope", float(self.price_slope))

    @property
    def n(self) -> int:
        return self.arrival.size

    def with_rate(self, which: str, index: int, value: float) -> "SupplyChainInstance":
        """Copy of the instance with one arrival or perish rate replaced."""
        if which not in ("arrival", "perish"):
            raise ValueError(f"which must be 'arrival' or 'perish', got {which!r}")
        rates = np.array(getattr(self, which))
        rates[index] = value
        return replace(self, **{which: rates})


@dataclass(frozen=True, eq=False)
class Allocation:
    """Probability vector routing the order stream across warehouses."""

    P: np.ndarray

    def __post_init__(self):
        P = np.atleast_1d(np.asarray(self.P, dtype=np.float64)).copy()
        if P.ndim != 1:
            raise ValueError("P must be a 1-d vector")
        if np.any(P < 0.0):
            raise ValueError("allocation entries must be nonnegative")
        total = float(P.sum())
        if abs(total - 1.0) > _SIMPLEX_TOL:
            raise ValueError(f"allocation must sum to 1 within {_SIMPLEX_TOL}, got {total!r}")
        P.flags.writeable = False
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.P.size

    @classmethod
    def uniform(cls, n: int) -> "Allocation":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Stationary quantities of the chain under a given allocation."""

    q: np.ndarray              # utilization = P(warehouse nonempty)
    expected_sale: np.ndarray  # mean objects actually bought per order
    purchase_rate: np.ndarray  # objects bought per unit time per warehouse
    unit_cost: float           # price per object

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "expected_sale": self.expected_sale.tolist(),
            "purchase_rate": self.purchase_rate.tolist(),
            "total_purchase_rate": float(self.purchase_rate.sum()),
            "unit_cost": self.unit_cost,
        }


def _check_alloc(inst: SupplyChainInstance, alloc: Allocation):
    if alloc.n != inst.n:
        raise ValueError(f"allocation has {alloc.n} entries for {inst.n} warehouses")


def _require_geometric(inst: SupplyChainInstance, what: str) -> float:
    if inst.batch.kind != "geometric":
        raise ValueError(f"{what} requires a geometric batch law, got {inst.batch.kind!r}")
    return inst.batch.u


def feasibility_lower_bounds(inst: SupplyChainInstance) -> np.ndarray:
    """Per-warehouse allocation lower bounds that keep every q[i] < 1.

    A warehouse is stable iff orders drain it faster than stock builds up:
    ``P[i] > (arrival[i] - perish[i]) / (order_rate * E[R])``, clipped below
    at zero. For the geometric law this is
    ``(arrival - perish) * (1 - u) / order_rate``.
    """
    return np.clip((inst.arrival - inst.perish) / (inst.order_rate * inst.batch.mean()), 0.0, None)


def _unstable_error(inst: SupplyChainInstance, alloc: Allocation, indices) -> UnstableError:
    bounds = feasibility_lower_bounds(inst)
    parts = [
        f"warehouse {i}: P={alloc.P[i]:.6g} <= stability lower bound {bounds[i]:.6g}"
        for i in indices
    ]
    return UnstableError(
        "allocation leaves warehouse(s) with utilization >= 1 (" + "; ".join(parts) + ")",
        indices=indices,
        bounds=bounds,
    )


def utilization_fixed_point(
    inst: SupplyChainInstance,
    alloc: Allocation,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Solve each warehouse's utilization through the network fixed point.

    The chain maps onto an N-queue network with no routing: object arrivals
    are ordinary customers, orders are external signals at rate
    ``order_rate * P[i]``, and perishing plays the role of service.
    """
    _check_alloc(inst, alloc)
    n = inst.n
    zeros = np.zeros((n, n))
    net = GNetwork(
        arrival=inst.arrival,
        signal=inst.order_rate * alloc.P,
        service=np.zeros(n),
        perish=inst.perish,
        p_plus=zeros,
        p_minus=zeros,
        depart=np.ones(n),
        batch=(inst.batch,) * n,
    )
    try:
        return solve_traffic(net, opts).q
    except UnstableError as err:
        raise _unstable_error(inst, alloc, err.indices) from None


def _closed_form_q(arrival, perish, u, order_flow):
    """Stable minus-root of the geometric quadratic; broadcasts.

    May return values >= 1 for infeasible order flows; callers decide how
    to treat instability.
    """
    ratio = arrival / (perish * u)
    A = (order_flow + perish + arrival * u) / (2.0 * u * perish)
    disc = A * A - ratio
    if np.any(disc < 0.0):
        raise ValueError("negative discriminant in the utilization quadratic")
    return ratio / (A + np.sqrt(disc))


def utilization_geometric_closed_form(inst: SupplyChainInstance, alloc: Allocation) -> np.ndarray:
    """Per-warehouse utilization in closed form for a geometric batch law."""
    u = _require_geometric(inst, "closed-form utilization")
    _check_alloc(inst, alloc)
    q = _closed_form_q(inst.arrival, inst.perish, u, inst.order_rate * alloc.P)
    bad = np.flatnonzero(q >= 1.0)
    if bad.size:
        raise _unstable_error(inst, alloc, bad)
    return q


def expected_sale(q, batch: BatchDistribution):
    """Mean objects bought per order at utilization q: ``q (1-F(q))/(1-q)``."""
    qa = np.asarray(q, dtype=np.float64)
    out = qa * removal_factor(batch, qa)
    return float(out) if qa.ndim == 0 else out


def expected_sale_conditional(q: float, r: int) -> float:
    """Mean objects bought by an order of exactly r: ``q (1 - q^r)/(1 - q)``.

    The order takes min(r, stock) under the geometric stationary stock law,
    so the mean truncates the requested size by availability.
    """
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q!r}")
    if r != int(r) or r < 1:
        raise ValueError(f"r must be a positive integer, got {r!r}")
    if q == 0.0:
        return 0.0
    return float(q * -np.expm1(int(r) * np.log(q)) / (1.0 - q))


def unit_cost(
    inst: SupplyChainInstance,
    alloc: Allocation,
    opts: SolverOptions | None = None,
) -> SteadyState:
    """Stationary purchase rates and per-object price under an allocation.

    The price is evaluated both as ``base_price + slope * sum(order_flow *
    E[S])`` and through flow conservation as ``base_price + slope *
    sum(arrival - q * perish)``; the two must agree to 1e-9, which pins
    down the utilization solve.
    """
    _check_alloc(inst, alloc)
    if inst.batch.kind == "geometric":
        q = utilization_geometric_closed_form(inst, alloc)
    else:
        q = utilization_fixed_point(inst, alloc, opts)
    sale = expected_sale(q, inst.batch)
    rate = inst.order_rate * alloc.P * sale
    cost = inst.base_price + inst.price_slope * float(rate.sum())
    cost_flow = inst.base_price + inst.price_slope * float((inst.arrival - q * inst.perish).sum())
    if abs(cost - cost_flow) > _FLOW_TOL:
        raise RuntimeError(
            f"flow conservation violated: {cost!r} vs {cost_flow!r} "
            "(utilization solve is inconsistent)"
        )
    return SteadyState(q=q, expected_sale=sale, purchase_rate=rate, unit_cost=cost)


def _dq_dP_vec(inst: SupplyChainInstance, P: np.ndarray) -> np.ndarray:
    """d q[i] / d P[i] for every warehouse (geometric law); always negative."""
    u = inst.batch.u
    A = (inst.order_rate * P + inst.perish + inst.arrival * u) / (2.0 * u * inst.perish)
    disc = A * A - inst.arrival / (inst.perish * u)
    if np.any(disc <= 0.0):
        raise ValueError("degenerate discriminant in the utilization derivative")
    return inst.order_rate / (2.0 * inst.perish * u) * (1.0 - A / np.sqrt(disc))


def dq_dP(inst: SupplyChainInstance, alloc: Allocation, i: int) -> float:
    """Sensitivity of warehouse i's utilization to its own allocation share."""
    _require_geometric(inst, "the analytic utilization derivative")
    _check_alloc(inst, alloc)
    return float(_dq_dP_vec(inst, alloc.P)[i])


def cost_gradient(inst: SupplyChainInstance, alloc: Allocation) -> np.ndarray:
    """Exact gradient of the unit cost in P for a geometric batch law.

    Because ``C = base_price + slope * sum(arrival - q * perish)``, each
    component is ``-slope * perish[i] * dq[i]/dP[i]``.
    """
    _require_geometric(inst, "the analytic cost gradient")
    _check_alloc(inst, alloc)
    return -inst.price_slope * inst.perish * _dq_dP_vec(inst, alloc.P)


def cost_hessian_diag(inst: SupplyChainInstance, alloc: Allocation) -> np.ndarray:
    """Diagonal of the cost Hessian in P (the Hessian is diagonal).

    Entries are ``-slope * order_rate**2 * arrival / (4 perish**2 u**3 *
    (A**2 - arrival/(perish u))**1.5)``, strictly positive whenever the
    slope is negative and the discriminant is positive, which certifies
    any stationary point as a strict local minimum.
    """
    u = _require_geometric(inst, "the analytic cost Hessian")
    _check_alloc(inst, alloc)
    A = (inst.order_rate * alloc.P + inst.perish + inst.arrival * u) / (2.0 * u * inst.perish)
    disc = A * A - inst.arrival / (inst.perish * u)
    if np.any(disc <= 0.0):
        raise ValueError("degenerate discriminant in the cost Hessian")
    return (
        -inst.price_slope
        * inst.order_rate**2
        * inst.arrival
        / (4.0 * inst.perish**2 * u**3 * disc**1.5)
    )


def _utilization_grid(inst: SupplyChainInstance, order_flow: np.ndarray,
                      tol: float = 1e-12, max_iters: int = 100_000,
                      damping: float = 0.5) -> np.ndarray:
    """Vectorized per-warehouse fixed point over an array of order flows.

    ``order_flow`` broadcasts against the warehouse axis (last axis).
    Returns q with infeasible entries pinned just below 1; used by the
    lattice oracle, which treats pinned entries as infeasible.
    """
    hi = 1.0 - 1e-9
    q = np.zeros(np.broadcast_shapes(order_flow.shape, inst.arrival.shape))
    prev_res = np.inf
    for _ in range(max_iters):
        rf = removal_factor(inst.batch, q)
        g = np.clip(inst.arrival / (inst.perish + order_flow * rf), 0.0, hi)
        res = float(np.max(np.abs(g - q)))
        if res < tol:
            # the map image pins infeasible entries exactly at the clamp
            return g
        if res > prev_res:
            damping = max(0.5 * damping, 2.0**-12)
        prev_res = res
        q = (1.0 - damping) * q + damping * g
    raise RuntimeError(f"vectorized utilization solve stalled at residual {res!r}")


# re-exported for callers that need F(q) alongside the supply quantities
__all__ = [
    "SupplyChainInstance",
    "Allocation",
    "SteadyState",
    "feasibility_lower_bounds",
    "utilization_fixed_point",
    "utilization_geometric_closed_form",
    "expected_sale",
    "expected_sale_conditional",
    "unit_cost",
    "dq_dP",
    "cost_gradient",
    "cost_hessian_diag",
    "generating_function",
]
