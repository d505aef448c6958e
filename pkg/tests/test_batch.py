"""Batch laws: generating function, removal factor, validation."""

import numpy as np
import pytest

from gchain import BatchDistribution, generating_function, removal_factor


def series_generating_function(batch, q, terms=200):
    """Independent oracle: direct series sum of the pmf."""
    if batch.kind == "geometric":
        r = np.arange(1, terms + 1)
        pmf = (1.0 - batch.u) * batch.u ** (r - 1)
    elif batch.kind == "deterministic":
        r = np.array([batch.size])
        pmf = np.array([1.0])
    else:
        r, pmf = batch.sizes, batch.probs
    return float(np.sum(pmf * q**r))


def test_generating_function_at_zero_is_zero():
    assert generating_function(BatchDistribution.geometric(0.3), 0.0) == 0.0
    assert generating_function(BatchDistribution.deterministic(4), 0.0) == 0.0


def test_generating_function_at_one_is_one():
    laws = [
        BatchDistribution.geometric(0.3),
        BatchDistribution.deterministic(7),
        BatchDistribution.explicit([(1, 0.25), (3, 0.5), (10, 0.25)]),
    ]
    for law in laws:
        assert generating_function(law, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_generating_function_geometric_value():
    law = BatchDistribution.geometric(0.3)
    value = generating_function(law, 0.2785)
    assert value == pytest.approx(0.21272, abs=1e-4)
    assert value == pytest.approx(series_generating_function(law, 0.2785), abs=1e-12)


def test_generating_function_explicit_matches_series():
    law = BatchDistribution.explicit([(2, 0.5), (5, 0.3), (9, 0.2)])
    for q in np.linspace(0.0, 1.0, 11):
        assert generating_function(law, q) == pytest.approx(
            series_generating_function(law, q), abs=1e-14
        )


def test_generating_function_domain():
    law = BatchDistribution.geometric(0.5)
    with pytest.raises(ValueError):
        generating_function(law, -0.1)
    with pytest.raises(ValueError):
        generating_function(law, 1.0001)


def test_generating_function_monotone_on_grid():
    rng = np.random.default_rng(7)
    laws = [BatchDistribution.geometric(float(rng.uniform(0.05, 0.95))) for _ in range(3)]
    laws += [BatchDistribution.deterministic(int(rng.integers(1, 9))) for _ in range(3)]
    for _ in range(3):
        sizes = rng.choice(np.arange(1, 30), size=5, replace=False)
        probs = rng.dirichlet(np.ones(5))
        laws.append(BatchDistribution.explicit(list(zip(sizes, probs / probs.sum()))))
    grid = np.linspace(0.0, 1.0, 100)
    for law in laws:
        values = generating_function(law, grid)
        assert np.all(np.diff(values) >= -1e-12)


def test_removal_factor_unit_batch_is_exactly_one():
    law = BatchDistribution.deterministic(1)
    for q in (0.0, 0.3, 0.7, 0.999999):
        assert removal_factor(law, q) == 1.0


def test_removal_factor_values():
    geo = BatchDistribution.geometric(0.3)
    assert removal_factor(geo, 0.0) == pytest.approx(1.0, abs=1e-14)
    value = removal_factor(geo, 0.2785)
    assert value == pytest.approx(1.09117, abs=1e-4)
    # analytic identity for the geometric law
    assert value == pytest.approx(1.0 / (1.0 - 0.2785 * 0.3), abs=1e-14)


def test_removal_factor_matches_series():
    law = BatchDistribution.explicit([(1, 0.2), (4, 0.5), (12, 0.3)])
    for q in np.linspace(0.0, 0.99, 34):
        expected = (1.0 - series_generating_function(law, q)) / (1.0 - q) if q > 0 else 1.0
        assert removal_factor(law, q) == pytest.approx(expected, rel=1e-12)


def test_removal_factor_monotone_and_bounded():
    rng = np.random.default_rng(11)
    laws = [
        BatchDistribution.geometric(0.6),
        BatchDistribution.deterministic(5),
        BatchDistribution.explicit([(2, 0.5), (7, 0.5)]),
    ]
    grid = np.linspace(0.0, 1.0 - 1e-9, 100)
    for law in laws:
        values = removal_factor(law, grid)
        assert np.all(np.diff(values) >= -1e-12)
        assert np.all(values >= 1.0 - 1e-12)
        assert np.all(values <= law.mean() + 1e-9)
    # random explicit laws too
    for _ in range(5):
        sizes = rng.choice(np.arange(1, 40), size=6, replace=False)
        probs = rng.dirichlet(np.ones(6))
        law = BatchDistribution.explicit(list(zip(sizes, probs / probs.sum())))
        values = removal_factor(law, grid)
        assert np.all(np.diff(values) >= -1e-12)
        assert np.all((values >= 1.0 - 1e-12) & (values <= law.mean() + 1e-9))


def test_removal_factor_domain():
    law = BatchDistribution.geometric(0.5)
    with pytest.raises(ValueError):
        removal_factor(law, 1.0)
    with pytest.raises(ValueError):
        removal_factor(law, -0.2)


def test_mean():
    assert BatchDistribution.deterministic(6).mean() == 6.0
    assert BatchDistribution.geometric(0.3).mean() == pytest.approx(1.0 / 0.7)
    law = BatchDistribution.explicit([(1, 0.5), (9, 0.5)])
    assert law.mean() == pytest.approx(5.0)


def test_explicit_validation():
    with pytest.raises(ValueError):
        BatchDistribution.explicit([])
    with pytest.raises(ValueError):
        BatchDistribution.explicit([(0, 1.0)])
    with pytest.raises(ValueError):
        BatchDistribution.explicit([(1, 0.5), (2, 0.6)])
    with pytest.raises(ValueError):
        BatchDistribution.explicit([(1, 0.5), (1, 0.5)])
    with pytest.raises(ValueError):
        BatchDistribution.explicit([(1, -0.5), (2, 1.5)])
    with pytest.raises(ValueError):
        BatchDistribution.explicit([(r, 1.0 / 20000) for r in range(1, 20001)])


def test_geometric_validation():
    for bad in (0.0, 1.0, -0.3, 1.7):
        with pytest.raises(ValueError):
            BatchDistribution.geometric(bad)


def test_deterministic_validation():
    for bad in (0, -2, 1.5):
        with pytest.raises(ValueError):
            BatchDistribution.deterministic(bad)
