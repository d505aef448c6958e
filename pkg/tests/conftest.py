"""Shared fixtures: the three-warehouse reference instance and generators.

The reference instance has a known interior optimum and is used across the
suite as a regression baseline; its expected values below are frozen from
the closed-form solution.
"""

import pathlib

import numpy as np
import pytest

from gchain import (
    Allocation,
    BatchDistribution,
    SupplyChainInstance,
    closed_form_allocation,
    feasibility_lower_bounds,
)
from gchain.errors import InteriorViolationError

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent
MODEL_FILE = REPO_ROOT / "models" / "three_warehouse.json"

# frozen expected values for the reference instance
REF_P_STAR = (0.2711, 0.3521, 0.3768)
REF_COST = 2.4100
REF_Q = (0.2785, 0.1762, 0.1246)
REF_RATES = (24.7215, 19.6477, 14.6263)
REF_BOUNDS = (0.056, 0.042, 0.028)


def make_reference_instance() -> SupplyChainInstance:
    return SupplyChainInstance(
        arrival=[25.0, 20.0, 15.0],
        perish=[1.0, 2.0, 3.0],
        order_rate=300.0,
        batch=BatchDistribution.geometric(0.3),
        base_price=3.0,
        price_slope=-0.01,
    )


@pytest.fixture(scope="session")
def reference():
    return make_reference_instance()


@pytest.fixture(scope="session")
def reference_optimum(reference):
    return closed_form_allocation(reference)


def random_interior_instance(rng) -> tuple:
    """Random geometric instance whose closed-form optimum is strictly interior.

    Returns (instance, closed-form result). Draws until the optimum clears
    the stability lower bounds with margin, which is the regime the closed
    form is defined on.
    """
    while True:
        n = int(rng.integers(1, 7))
        lam = rng.uniform(0.5, 30.0, n)
        mu = rng.uniform(0.5, 5.0, n)
        u = float(rng.uniform(0.05, 0.9))
        gamma = float(lam.sum() * rng.uniform(1.5, 4.0))
        inst = SupplyChainInstance(
            arrival=lam,
            perish=mu,
            order_rate=gamma,
            batch=BatchDistribution.geometric(u),
            base_price=float(rng.uniform(1.0, 10.0)),
            price_slope=-float(rng.uniform(0.001, 0.05)),
        )
        try:
            result = closed_form_allocation(inst)
        except InteriorViolationError:
            continue
        if np.all(result.P_star.P > feasibility_lower_bounds(inst) + 1e-6):
            return inst, result


def random_feasible_allocation(rng, inst) -> Allocation:
    """Random allocation strictly above the stability lower bounds."""
    bounds = feasibility_lower_bounds(inst)
    slack = 1.0 - bounds.sum()
    assert slack > 0
    weights = rng.dirichlet(np.ones(inst.n))
    return Allocation(bounds + slack * weights)
