"""Open queueing networks with signals and batch removal.

Customers come in two flavours: ordinary ("positive") customers that join
a queue, and signals that knock a random batch of customers out of the
queue they hit (a signal arriving at an empty queue vanishes with no
effect). A served customer leaves queue i for queue j as an ordinary
customer with probability ``p_plus[i, j]``, turns into a signal for queue
j with probability ``p_minus[i, j]``, or departs with probability
``depart[i]``. Each queue additionally loses its head-of-line customer to
perishing at its own exponential rate.

When the nonlinear traffic equations

    arrival_eff[i] = arrival[i] + sum_j q[j] * service[j] * p_plus[j, i]
    signal_eff[i]  = signal[i]  + sum_j q[j] * service[j] * p_minus[j, i]
    q[i] = arrival_eff[i] / (service[i] + perish[i]
                             + signal_eff[i] * (1 - F_i(q[i])) / (1 - q[i]))

have a solution with every ``q[i]`` strictly below one, the stationary
joint queue-length law is product form:
``p(k) = prod_i (1 - q[i]) * q[i]**k[i]``. ``F_i`` is the generating
function of queue i's own batch law; with unit deterministic batches and
no perishing the equations collapse to the classic negative-customer
network ``q[i] = arrival_eff[i] / (service[i] + signal_eff[i])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .batch import BatchDistribution, removal_factor
from .errors import NonConvergenceError, UnstableError

_ROW_SUM_TOL = 1e-12
# Utilizations are clamped just below 1 between sweeps so the damped map
# stays defined while instability is being detected.
_Q_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Damped fixed-point iteration controls for :func:`solve_traffic`."""

    tol: float = 1e-12
    max_iters: int = 100_000
    damping: float = 0.5
    margin: float = 1e-9


def _rates(name, values, n=None):
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64)).copy()
    if arr.ndim != 1 or (n is not None and arr.size != n):
        raise ValueError(f"{name} must be a 1-d vector" + (f" of length {n}" if n else ""))
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite and nonnegative")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GNetwork:
    """An N-queue network: external rates, routing, perishing, batch laws."""

    arrival: np.ndarray        # external ordinary-customer Poisson rates
    signal: np.ndarray         # external signal Poisson rates
    service: np.ndarray        # per-queue exponential service rates
    perish: np.ndarray         # per-queue exponential perish rates
    p_plus: np.ndarray         # routing as ordinary customer, n x n
    p_minus: np.ndarray        # routing as signal, n x n
    depart: np.ndarray         # departure probabilities
    batch: tuple = field(repr=False)  # one BatchDistribution per queue

    def __post_init__(self):
        arrival = _rates("arrival", self.arrival)
        n = arrival.size
        if n < 1:
            raise ValueError("network needs at least one queue")
        object.__setattr__(self, "arrival", arrival)
        object.__setattr__(self, "signal", _rates("signal", self.signal, n))
        object.__setattr__(self, "service", _rates("service", self.service, n))
        object.__setattr__(self, "perish", _rates("perish", self.perish, n))
        object.__setattr__(self, "depart", _rates("depart", self.depart, n))
        for name in ("p_plus", "p_minus"):
            mat = np.asarray(getattr(self, name), dtype=np.float64).copy()
            if mat.shape != (n, n):
                raise ValueError(f"{name} must be an {n}x{n} matrix")
            if np.any(mat < 0.0):
                raise ValueError(f"{name} entries must be nonnegative")
            mat.flags.writeable = False
            object.__setattr__(self, name, mat)
        row = self.p_plus.sum(axis=1) + self.p_minus.sum(axis=1) + self.depart
        if np.any(np.abs(row - 1.0) > _ROW_SUM_TOL):
            bad = int(np.argmax(np.abs(row - 1.0)))
            raise ValueError(
                f"routing rows must sum to 1 within {_ROW_SUM_TOL}; "
                f"queue {bad} sums to {row[bad]!r}"
            )
        batches = tuple(self.batch)
        if len(batches) != n or not all(isinstance(b, BatchDistribution) for b in batches):
            raise ValueError(f"batch must hold one BatchDistribution per queue ({n})")
        object.__setattr__(self, "batch", batches)

    @property
    def n(self) -> int:
        return self.arrival.size


@dataclass(frozen=True, eq=False)
class TrafficSolution:
    """Converged traffic fixed point.

    ``arrival_eff`` and ``signal_eff`` are the effective per-queue rates
    including internal routing; they satisfy the traffic equations at the
    returned ``q`` up to ``residual`` (max norm).
    """

    q: np.ndarray
    arrival_eff: np.ndarray
    signal_eff: np.ndarray
    iterations: int
    residual: float

    @property
    def n(self) -> int:
        return self.q.size


def _traffic_map(net: GNetwork, q: np.ndarray):
    """One application of the traffic operator; returns (g, arrival_eff, signal_eff)."""
    flow = q * net.service
    arrival_eff = net.arrival + flow @ net.p_plus
    signal_eff = net.signal + flow @ net.p_minus
    rf = np.array([removal_factor(net.batch[i], q[i]) for i in range(net.n)])
    denom = net.service + net.perish + signal_eff * rf
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(denom > 0.0, arrival_eff / denom, np.where(arrival_eff > 0.0, np.inf, 0.0))
    return np.clip(g, 0.0, _Q_CLAMP), arrival_eff, signal_eff


def solve_traffic(net: GNetwork, opts: SolverOptions | None = None) -> TrafficSolution:
    """Solve the traffic equations by damped fixed-point iteration.

    Starting from q = 0, each sweep recomputes the effective rates from the
    current q and applies ``q <- (1 - damping) * q + damping * G(q)`` with
    the clamped traffic operator G. Convergence is declared when
    ``max |G(q) - q| < opts.tol``.

    Raises:
        UnstableError: the converged point has some q[i] >= 1 - opts.margin,
            i.e. no valid product-form solution exists.
        NonConvergenceError: the iteration cap was reached first.
    """
    opts = opts or SolverOptions()
    q = np.zeros(net.n)
    damping = opts.damping
    prev_residual = np.inf
    for iteration in range(1, opts.max_iters + 1):
        g, arrival_eff, signal_eff = _traffic_map(net, q)
        residual = float(np.max(np.abs(g - q)))
        if residual < opts.tol:
            # use the map image: a pinned queue sits exactly at the clamp,
            # while the damped iterate approaches it from below
            unstable = np.flatnonzero(g >= 1.0 - opts.margin)
            if unstable.size:
                raise UnstableError(
                    "no stable product-form solution: utilization pinned at 1 "
                    f"for queue(s) {unstable.tolist()}",
                    indices=unstable,
                )
            return TrafficSolution(
                q=q,
                arrival_eff=arrival_eff,
                signal_eff=signal_eff,
                iterations=iteration,
                residual=residual,
            )
        if residual > prev_residual:
            # steep removal factors can make the damped map oscillate;
            # shrinking the damping always restores contraction
            damping = max(0.5 * damping, 2.0**-12)
        prev_residual = residual
        q = (1.0 - damping) * q + damping * g
    raise NonConvergenceError(
        f"traffic fixed point did not reach tol={opts.tol} in {opts.max_iters} sweeps",
        iterations=opts.max_iters,
        residual=residual,
    )


def stationary_probability(sol: TrafficSolution, k) -> float:
    """Product-form stationary probability of the joint queue-length vector k."""
    k = np.asarray(k)
    if k.shape != (sol.n,):
        raise ValueError(f"k must have length {sol.n}, got shape {k.shape}")
    if np.any(k < 0) or not np.issubdtype(k.dtype, np.integer):
        raise ValueError("k must be a vector of nonnegative integers")
    return float(np.prod((1.0 - sol.q) * sol.q ** k))
