"""Event-driven simulator: statistical validation, determinism, accounting."""

import os
import subprocess
import sys

import numpy as np
import pytest

from gchain import (
    Allocation,
    BatchDistribution,
    SimConfig,
    SimEstimates,
    SupplyChainInstance,
    compare_to_analytic,
    simulate,
    utilization_geometric_closed_form,
)
from gchain.simulate import HIST_BINS, stream_seeds, write_histogram_csv


def mm1_instance():
    """Warehouse 0 sees no orders (pure birth-death); warehouse 1 absorbs P."""
    return SupplyChainInstance(
        arrival=[0.5, 2.0], perish=[1.0, 4.0], order_rate=20.0,
        batch=BatchDistribution.geometric(0.4), base_price=1.0, price_slope=-0.001,
    )


def small_config(**overrides):
    inst = SupplyChainInstance(
        arrival=[5.0, 3.0], perish=[1.0, 2.0], order_rate=30.0,
        batch=BatchDistribution.geometric(0.3), base_price=2.0, price_slope=-0.01,
    )
    kwargs = dict(instance=inst, allocation=Allocation([0.6, 0.4]),
                  horizon=2_000.0, warmup=200.0, replications=4, seed=1234)
    kwargs.update(overrides)
    return SimConfig(**kwargs)


def test_mm1_occupancy():
    config = SimConfig(
        instance=mm1_instance(), allocation=Allocation([0.0, 1.0]),
        horizon=50_000.0, warmup=5_000.0, replications=4, seed=11,
    )
    est = simulate(config)
    assert abs(est.q_hat[0] - 0.5) < 3.0 * est.q_se[0]
    # no orders ever reach warehouse 0
    assert est.count("orders_measured")[:, 0].sum() == 0
    assert est.sale_hat[0] == 0.0


def test_reference_node_one_in_isolation():
    inst = SupplyChainInstance(
        arrival=[25.0], perish=[1.0], order_rate=81.335,
        batch=BatchDistribution.geometric(0.3), base_price=3.0, price_slope=-0.01,
    )
    config = SimConfig(instance=inst, allocation=Allocation([1.0]),
                       horizon=1e5, warmup=1e4, replications=10, seed=11)
    est = simulate(config)
    assert abs(est.q_hat[0] - 0.2785) < 3.0 * est.q_se[0]
    assert abs(est.purchase_rate_hat[0] - 24.7215) < 3.0 * est.purchase_rate_se[0]


def test_empty_warehouse_sells_nothing():
    inst = SupplyChainInstance(
        arrival=[1e-12, 5.0], perish=[1.0, 1.0], order_rate=10.0,
        batch=BatchDistribution.geometric(0.3), base_price=1.0, price_slope=-0.01,
    )
    config = SimConfig(instance=inst, allocation=Allocation([0.5, 0.5]),
                       horizon=5_000.0, warmup=500.0, replications=2, seed=5)
    est = simulate(config)
    assert est.q_hat[0] == 0.0
    assert est.sale_hat[0] == 0.0
    assert est.count("sold")[:, 0].sum() == 0


def test_determinism_bitwise():
    a = simulate(small_config())
    b = simulate(small_config())
    assert np.array_equal(a.q_hat, b.q_hat)
    assert np.array_equal(a.sale_hat, b.sale_hat)
    assert np.array_equal(a.purchase_rate_hat, b.purchase_rate_hat)
    assert np.array_equal(a.marginal_hist, b.marginal_hist)
    assert np.array_equal(a.event_counts, b.event_counts)


def test_seed_changes_results():
    a = simulate(small_config())
    b = simulate(small_config(seed=4321))
    assert not np.array_equal(a.event_counts, b.event_counts)


def test_fallback_path_matches_numba_bitwise():
    """The pure-Python kernels must reproduce the numba stream exactly."""
    config = small_config(horizon=300.0, warmup=50.0, replications=2)
    est = simulate(config)
    script = (
        "import numpy as np\n"
        "from gchain import *\n"
        "inst = SupplyChainInstance(arrival=[5.0,3.0], perish=[1.0,2.0], order_rate=30.0,\n"
        "    batch=BatchDistribution.geometric(0.3), base_price=2.0, price_slope=-0.01)\n"
        "cfg = SimConfig(instance=inst, allocation=Allocation([0.6,0.4]),\n"
        "    horizon=300.0, warmup=50.0, replications=2, seed=1234)\n"
        "est = simulate(cfg)\n"
        "print(est.q_hat.tobytes().hex())\n"
        "print(est.event_counts.tobytes().hex())\n"
    )
    env = dict(os.environ, GCHAIN_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", script], capture_output=True,
                         text=True, env=env, check=True)
    q_hex, counts_hex = out.stdout.split()
    assert q_hex == est.q_hat.tobytes().hex()
    assert counts_hex == est.event_counts.tobytes().hex()


def test_object_conservation_exact():
    est = simulate(small_config())
    arrived = est.count("arrivals")
    balance = est.count("perished") + est.count("sold") + est.count("remaining")
    assert np.array_equal(arrived, balance)


def test_order_accounting_poisson():
    config = small_config(horizon=5_000.0, warmup=500.0, replications=6)
    est = simulate(config)
    measured = config.horizon - config.warmup
    flow = config.instance.order_rate * config.allocation.P
    total = est.count("orders_measured").sum(axis=0)
    mean = flow * measured * config.replications
    assert np.all(np.abs(total - mean) <= 3.0 * np.sqrt(mean))


def test_standard_error_shrinks_with_replications():
    base = small_config(horizon=600.0, warmup=100.0, replications=24, seed=2)
    double = small_config(horizon=600.0, warmup=100.0, replications=48, seed=2)
    se_base = simulate(base).q_se.mean()
    se_double = simulate(double).q_se.mean()
    ratio = se_base / se_double
    assert 1.2 < ratio < 1.8


def test_histogram_is_time_weighted_distribution(reference, reference_optimum):
    est = simulate(small_config())
    sums = est.marginal_hist.sum(axis=1)
    assert np.max(np.abs(sums - 1.0)) < 1e-12
    assert np.all(est.q_hat >= 0.0) and np.all(est.q_hat <= 1.0)
    # empirical P(empty) complements q_hat (same integral, averaged per rep)
    assert est.marginal_hist.shape == (2, HIST_BINS)


def test_compare_to_analytic_self_consistent():
    inst = SupplyChainInstance(
        arrival=[5.0], perish=[1.0], order_rate=30.0,
        batch=BatchDistribution.geometric(0.3), base_price=2.0, price_slope=-0.01,
    )
    alloc = Allocation([1.0])
    q = utilization_geometric_closed_form(inst, alloc)
    from gchain import expected_sale

    sale = expected_sale(q, inst.batch)
    rate = inst.order_rate * alloc.P * sale
    levels = np.arange(HIST_BINS - 1)
    hist = np.append((1.0 - q[0]) * q[0] ** levels, q[0] ** (HIST_BINS - 1))[None, :]
    config = SimConfig(instance=inst, allocation=alloc, horizon=10.0,
                       warmup=1.0, replications=2, seed=0)
    est = SimEstimates(
        q_hat=q.copy(), q_se=np.full(1, 1e-9),
        sale_hat=sale.copy(), sale_se=np.full(1, 1e-9),
        purchase_rate_hat=rate.copy(), purchase_rate_se=np.full(1, 1e-9),
        marginal_hist=hist, event_counts=np.zeros((2, 1, 6), np.int64),
        config=config,
    )
    report = compare_to_analytic(est, inst, alloc)
    assert report.passed
    tv_checks = [c for c in report.checks if c.metric == "marginal_tv"]
    assert tv_checks[0].statistic == 0.0


def test_compare_to_analytic_negative_control():
    config = small_config(horizon=5_000.0, warmup=500.0, replications=6)
    est = simulate(config)
    good = compare_to_analytic(est, config.instance, config.allocation)
    assert good.passed
    wrong = SupplyChainInstance(
        arrival=config.instance.arrival, perish=2.0 * config.instance.perish,
        order_rate=config.instance.order_rate, batch=config.instance.batch,
        base_price=2.0, price_slope=-0.01,
    )
    bad = compare_to_analytic(est, wrong, config.allocation)
    assert not bad.passed
    q_checks = [c for c in bad.checks if c.metric == "q"]
    assert any(not c.passed for c in q_checks)


def test_stream_seeds_distinct():
    seeds = stream_seeds(123, 4, 3)
    assert seeds.shape == (4, 3)
    assert np.unique(seeds).size == 12


def test_config_validation():
    inst = mm1_instance()
    alloc = Allocation([0.5, 0.5])
    with pytest.raises(ValueError):
        SimConfig(instance=inst, allocation=alloc, horizon=0.0)
    with pytest.raises(ValueError):
        SimConfig(instance=inst, allocation=alloc, horizon=10.0, warmup=10.0)
    with pytest.raises(ValueError):
        SimConfig(instance=inst, allocation=alloc, horizon=10.0, replications=0)
    with pytest.raises(ValueError):
        SimConfig(instance=inst, allocation=Allocation([1.0]), horizon=10.0)
    # warmup defaults to 10% of the horizon
    assert SimConfig(instance=inst, allocation=alloc, horizon=10.0).warmup == 1.0


def test_histogram_csv(tmp_path):
    est = simulate(small_config(horizon=500.0, warmup=50.0, replications=2))
    path = tmp_path / "hist.csv"
    write_histogram_csv(est, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "warehouse,k,time_fraction"
    assert len(lines) == 1 + 2 * HIST_BINS
    total = sum(float(line.split(",")[2]) for line in lines[1:])
    assert total == pytest.approx(2.0, abs=1e-9)
