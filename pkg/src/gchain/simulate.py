"""Discrete-event validation of the stationary analysis.

Simulates each warehouse exactly as the model states it: Poisson object
arrivals, one exponential perish clock active while stocked, Poisson
orders drawing a random batch and taking what is available (orders into an
empty warehouse vanish, recorded as sales of size zero). Warehouses are
independent, so each (replication, warehouse) pair runs as its own event
loop; replications run in parallel under numba with results reduced in
replication order, making output independent of scheduling.

Reproducibility contract: the RNG is splitmix64. Replication r derives its
seed as ``base_seed XOR mix(r)`` and warehouse i within the replication
streams from ``mix(rep_seed + (i + 1) * GAMMA)``, where ``mix`` is one
splitmix64 step and GAMMA its increment constant 0x9E3779B97F4A7C15.
Identical configurations therefore produce bit-identical estimates, on
both the numba and the pure-Python execution paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._accel import apply_thread_cap
from ._kernels import _SM64_GAMMA, _sim_driver, _sm64_next
from .gnet import SolverOptions
from .supply import (
    Allocation,
    SupplyChainInstance,
    expected_sale,
    utilization_fixed_point,
    utilization_geometric_closed_form,
)

RNG_NAME = "splitmix64"

# queue-length histogram bins 0 .. HIST_BINS-2 are exact; the last bin
# absorbs everything above (negligible mass for any utilization of interest)
HIST_BINS = 512

_COUNT_FIELDS = ("arrivals", "perished", "sold", "remaining", "orders_measured", "sold_measured")


@dataclass(frozen=True, eq=False)
class SimConfig:
    """One simulation campaign: instance, allocation, horizon and streams."""

    instance: SupplyChainInstance
    allocation: Allocation
    horizon: float
    warmup: float | None = None   # defaults to 10% of the horizon
    replications: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.allocation.n != self.instance.n:
            raise ValueError("allocation length does not match the instance")
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        warmup = 0.1 * self.horizon if self.warmup is None else float(self.warmup)
        if not 0.0 <= warmup < self.horizon:
            raise ValueError(f"warmup must lie in [0, horizon), got {warmup!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "warmup", warmup)
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)


def _mix(x: np.uint64) -> np.uint64:
    _, out = _sm64_next(x)
    return out


def stream_seeds(base_seed: int, replications: int, n: int) -> np.ndarray:
    """Derive the (replication, warehouse) seed matrix from the base seed."""
    seeds = np.empty((replications, n), dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF)
        for r in range(replications):
            rep_seed = base ^ _mix(np.uint64(r))
            for i in range(n):
                seeds[r, i] = _mix(rep_seed + np.uint64(i + 1) * _SM64_GAMMA)
    return seeds


@dataclass(frozen=True, eq=False)
class SimEstimates:
    """Replication-aggregated estimates with standard errors.

    ``marginal_hist`` rows are the time-weighted empirical queue-length
    distributions (one per warehouse, last bin = overflow); each row sums
    to 1. ``event_counts`` holds the raw per-replication counters in the
    order: arrivals, perished, sold, remaining, orders_measured,
    sold_measured — the first four cover the whole run and balance exactly.
    """

    q_hat: np.ndarray
    q_se: np.ndarray
    sale_hat: np.ndarray
    sale_se: np.ndarray
    purchase_rate_hat: np.ndarray
    purchase_rate_se: np.ndarray
    marginal_hist: np.ndarray           # (n, HIST_BINS)
    event_counts: np.ndarray = field(repr=False)  # (replications, n, 6) int64
    config: SimConfig = field(repr=False, default=None)

    def count(self, name: str) -> np.ndarray:
        return self.event_counts[:, :, _COUNT_FIELDS.index(name)]

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "rng": RNG_NAME,
            "seed": cfg.seed,
            "horizon": cfg.horizon,
            "warmup": cfg.warmup,
            "replications": cfg.replications,
            "q_hat": self.q_hat.tolist(),
            "q_se": self.q_se.tolist(),
            "sale_hat": self.sale_hat.tolist(),
            "sale_se": self.sale_se.tolist(),
            "purchase_rate_hat": self.purchase_rate_hat.tolist(),
            "purchase_rate_se": self.purchase_rate_se.tolist(),
            "orders_observed": self.count("orders_measured").sum(axis=0).tolist(),
        }


def _mean_se(per_rep: np.ndarray):
    mean = per_rep.mean(axis=0)
    if per_rep.shape[0] > 1:
        se = per_rep.std(axis=0, ddof=1) / np.sqrt(per_rep.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


def simulate(config: SimConfig) -> SimEstimates:
    """Run the campaign and aggregate time-weighted statistics.

    Statistics are integrals over [warmup, horizon): ``q_hat`` is the
    fraction of time nonempty, ``sale_hat`` the mean objects per order
    (count-weighted), ``purchase_rate_hat`` objects sold per unit time.
    Standard errors are across replications.
    """
    inst = config.instance
    n = inst.n
    reps = config.replications
    kind, det_size, log_u, sizes, cdf = inst.batch.kernel_encoding()
    seeds = stream_seeds(config.seed, reps, n)
    hist = np.zeros((reps, n, HIST_BINS))
    counts = np.zeros((reps, n, len(_COUNT_FIELDS)), dtype=np.int64)
    apply_thread_cap()
    with np.errstate(over="ignore"):
        _sim_driver(
            inst.arrival, inst.perish, inst.order_rate * config.allocation.P,
            kind, det_size, log_u, sizes, cdf,
            config.horizon, config.warmup, seeds, hist, counts,
        )
    measured = config.horizon - config.warmup
    q_rep = 1.0 - hist[:, :, 0] / measured
    orders = counts[:, :, 4]
    sold = counts[:, :, 5]
    with np.errstate(invalid="ignore"):
        sale_rep = np.where(orders > 0, sold / np.maximum(orders, 1), 0.0)
    rate_rep = sold / measured
    q_hat, q_se = _mean_se(q_rep)
    sale_hat, sale_se = _mean_se(sale_rep)
    rate_hat, rate_se = _mean_se(rate_rep)
    total_time = hist.sum(axis=0)
    marginal = total_time / total_time.sum(axis=1, keepdims=True)
    return SimEstimates(
        q_hat=q_hat, q_se=q_se,
        sale_hat=sale_hat, sale_se=sale_se,
        purchase_rate_hat=rate_hat, purchase_rate_se=rate_se,
        marginal_hist=marginal,
        event_counts=counts,
        config=config,
    )


@dataclass(frozen=True, eq=False)
class MetricCheck:
    """One simulated-vs-analytic comparison."""

    metric: str
    warehouse: int
    simulated: float
    analytic: float
    statistic: float   # |z| for moment checks, TV distance for histograms
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "warehouse": self.warehouse,
            "simulated": self.simulated,
            "analytic": self.analytic,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _z_value(simulated: float, analytic: float, se: float) -> float:
    if se > 0.0:
        return abs(simulated - analytic) / se
    return 0.0 if simulated == analytic else np.inf


def compare_to_analytic(
    estimates: SimEstimates,
    inst: SupplyChainInstance,
    alloc: Allocation,
    z_threshold: float = 3.0,
    tv_threshold: float = 0.01,
) -> ComparisonReport:
    """Score simulated moments and marginals against the product form.

    Moments (``q``, sale per order, purchase rate) are z-scored against
    their replication standard errors; the empirical queue-length law is
    compared to the geometric marginal ``(1 - q) q^k`` by total-variation
    distance over the histogram support (overflow bin against the tail
    mass). Raises UnstableError when the instance has no stationary law to
    compare against.
    """
    if alloc.n != inst.n or estimates.q_hat.size != inst.n:
        raise ValueError("estimates, instance and allocation dimensions disagree")
    if inst.batch.kind == "geometric":
        q = utilization_geometric_closed_form(inst, alloc)
    else:
        q = utilization_fixed_point(inst, alloc, SolverOptions())
    sale = expected_sale(q, inst.batch)
    rate = inst.order_rate * alloc.P * sale
    checks = []
    bins = estimates.marginal_hist.shape[1]
    levels = np.arange(bins - 1)
    for i in range(inst.n):
        for name, simulated, analytic, se in (
            ("q", estimates.q_hat[i], q[i], estimates.q_se[i]),
            ("sale_per_order", estimates.sale_hat[i], sale[i], estimates.sale_se[i]),
            ("purchase_rate", estimates.purchase_rate_hat[i], rate[i],
             estimates.purchase_rate_se[i]),
        ):
            z = _z_value(float(simulated), float(analytic), float(se))
            checks.append(MetricCheck(name, i, float(simulated), float(analytic),
                                      float(z), z_threshold, bool(z < z_threshold)))
        marginal = np.append((1.0 - q[i]) * q[i] ** levels, q[i] ** (bins - 1))
        tv = 0.5 * float(np.abs(estimates.marginal_hist[i] - marginal).sum())
        checks.append(MetricCheck("marginal_tv", i, tv, 0.0, tv, tv_threshold,
                                  bool(tv < tv_threshold)))
    return ComparisonReport(checks)


def write_histogram_csv(estimates: SimEstimates, path) -> None:
    """Write the time-weighted queue-length histogram (warehouse, k, time_fraction)."""
    with open(path, "w", newline="") as fh:
        fh.write("warehouse,k,time_fraction\n")
        n, bins = estimates.marginal_hist.shape
        for i in range(n):
            for k in range(bins):
                fh.write(f"{i},{k},{float(estimates.marginal_hist[i, k])!r}\n")
