"""Batch-size laws for order-triggered removal.

An order removes a random batch of objects from the queue it hits (or
empties the queue if it holds fewer). The analytics only ever need two
functionals of the batch law: the probability generating function
``F(q) = sum_{r>=1} pi(r) q^r`` and the removal factor
``(1 - F(q)) / (1 - q)``, which scales the order rate inside the traffic
equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Explicit pmfs are kept exact; this cap only guards against absurd inputs.
MAX_EXPLICIT_SUPPORT = 10_000

_KIND_CODES = {"deterministic": 0, "geometric": 1, "explicit": 2}


@dataclass(frozen=True, eq=False)
class BatchDistribution:
    """Probability law of the (positive integer) batch size of an order.

    Construct through :meth:`deterministic`, :meth:`geometric` or
    :meth:`explicit`. The geometric law has pmf ``(1 - u) * u**(r - 1)``
    for ``r >= 1``, so its mean is ``1 / (1 - u)``.
    """

    kind: str
    size: int = 0
    u: float = 0.0
    sizes: np.ndarray | None = field(default=None, repr=False)
    probs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown batch kind {self.kind!r}")

    @classmethod
    def deterministic(cls, size: int) -> "BatchDistribution":
        if size != int(size) or size < 1:
            raise ValueError(f"batch size must be a positive integer, got {size!r}")
        return cls(kind="deterministic", size=int(size))

    @classmethod
    def geometric(cls, u: float) -> "BatchDistribution":
        u = float(u)
        if not 0.0 < u < 1.0:
            raise ValueError(f"geometric parameter u must lie in (0, 1), got {u}")
        return cls(kind="geometric", u=u)

    @classmethod
    def explicit(cls, pmf, max_support: int = MAX_EXPLICIT_SUPPORT) -> "BatchDistribution":
        """Finite pmf given as an iterable of ``(r, prob)`` pairs."""
        pairs = sorted((int(r), float(p)) for r, p in pmf)
        if not pairs:
            raise ValueError("explicit pmf must have at least one entry")
        if len(pairs) > max_support:
            raise ValueError(f"explicit pmf exceeds the support cap ({max_support} entries)")
        sizes = np.array([r for r, _ in pairs], dtype=np.int64)
        probs = np.array([p for _, p in pairs], dtype=np.float64)
        if sizes[0] < 1:
            raise ValueError("batch sizes must be >= 1")
        if np.unique(sizes).size != sizes.size:
            raise ValueError("batch sizes must be distinct")
        if np.any(probs <= 0.0):
            raise ValueError("pmf entries must be strictly positive")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"pmf must sum to 1 within 1e-12, got {total!r}")
        sizes.flags.writeable = False
        probs.flags.writeable = False
        return cls(kind="explicit", sizes=sizes, probs=probs)

    def mean(self) -> float:
        """E[R], the mean batch size (finite for all supported kinds)."""
        if self.kind == "deterministic":
            return float(self.size)
        if self.kind == "geometric":
            return 1.0 / (1.0 - self.u)
        return float(self.sizes @ self.probs)

    def kernel_encoding(self):
        """Flat ``(kind_code, det_size, log_u, sizes, cdf)`` for the kernels."""
        if self.kind == "deterministic":
            return 0, self.size, 0.0, np.ones(1, np.int64), np.ones(1, np.float64)
        if self.kind == "geometric":
            return 1, 0, float(np.log(self.u)), np.ones(1, np.int64), np.ones(1, np.float64)
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return 2, 0, 0.0, self.sizes, cdf


def generating_function(batch: BatchDistribution, q):
    """Evaluate ``F(q) = sum_{r>=1} pi(r) q^r`` for ``q`` in [0, 1].

    Accepts a scalar or an ndarray and broadcasts. ``F(0) = 0`` and
    ``F(1) = 1`` for every proper batch law.
    """
    qa = np.asarray(q, dtype=np.float64)
    if np.any(qa < 0.0) or np.any(qa > 1.0):
        raise ValueError(f"q must lie in [0, 1], got {q!r}")
    if batch.kind == "geometric":
        out = qa * (1.0 - batch.u) / (1.0 - qa * batch.u)
    elif batch.kind == "deterministic":
        out = qa ** batch.size
    else:
        out = (batch.probs * qa[..., None] ** batch.sizes).sum(axis=-1)
    return float(out) if qa.ndim == 0 else out


def removal_factor(batch: BatchDistribution, q):
    """Evaluate ``(1 - F(q)) / (1 - q)`` for ``q`` in [0, 1).

    This is the mean effective batch size seen by the traffic equations:
    it equals 1 at q = 0, increases with q, and tends to E[R] as q -> 1.
    A unit deterministic batch gives exactly 1 for every q, collapsing
    batch removal to classic one-at-a-time negative customers.

    Computed as ``sum_r pi(r) * (-expm1(r log q)) / (1 - q)`` so that no
    cancellation occurs near q = 1.
    """
    qa = np.asarray(q, dtype=np.float64)
    if np.any(qa < 0.0) or np.any(qa >= 1.0):
        raise ValueError(f"q must lie in [0, 1), got {q!r}")
    if batch.kind == "geometric":
        out = 1.0 / (1.0 - qa * batch.u)
    elif batch.kind == "deterministic" and batch.size == 1:
        out = np.ones_like(qa)
    else:
        with np.errstate(divide="ignore"):
            logq = np.log(qa)
        if batch.kind == "deterministic":
            complement = -np.expm1(batch.size * logq)
        else:
            complement = (batch.probs * -np.expm1(batch.sizes * logq[..., None])).sum(axis=-1)
        out = complement / (1.0 - qa)
    return float(out) if qa.ndim == 0 else out
