"""Hot numeric kernels: simulator event loop and geometric allocation descent.

Every function here is written once and either numba-compiled or run as
plain Python/NumPy, selected at import time (see ``_accel``). The RNG is
splitmix64 — a splittable 64-bit generator whose state update and output
use only uint64 arithmetic, so both execution paths produce bit-identical
streams. Callers on the fallback path must wrap invocations in
``np.errstate(over="ignore")``: the uint64 wraparound is intentional.
"""

import math

import numpy as np

from ._accel import jit_kernel, prange

U64 = np.uint64
_SM64_GAMMA = U64(0x9E3779B97F4A7C15)
_SM64_MIX1 = U64(0xBF58476D1CE4E5B9)
_SM64_MIX2 = U64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


@jit_kernel()
def _sm64_next(state):
    # one splitmix64 step: returns (new_state, 64-bit output)
    state = state + _SM64_GAMMA
    z = state
    z = (z ^ (z >> U64(30))) * _SM64_MIX1
    z = (z ^ (z >> U64(27))) * _SM64_MIX2
    return state, z ^ (z >> U64(31))


@jit_kernel()
def _next_uniform(state):
    # 53-bit uniform in [0, 1)
    state, z = _sm64_next(state)
    return state, (z >> U64(11)) * _INV_2_53


@jit_kernel()
def _sample_batch(state, kind, det_size, log_u, sizes, cdf):
    # kind: 0 deterministic (no draw), 1 geometric, 2 explicit pmf
    if kind == 0:
        return state, det_size
    state, v = _next_uniform(state)
    if kind == 1:
        r = int(math.floor(math.log1p(-v) / log_u)) + 1
        if r < 1:
            r = 1
        return state, r
    idx = np.searchsorted(cdf, v, side="right")
    if idx >= sizes.shape[0]:
        idx = sizes.shape[0] - 1
    return state, int(sizes[idx])


@jit_kernel()
def _sim_warehouse(arrival, perish, order_flow, kind, det_size, log_u, sizes, cdf,
                   horizon, warmup, seed, hist, counts):
    """Simulate one warehouse over [0, horizon); single replication.

    Competing exponentials: at stock k the active rates are ``arrival``,
    ``perish`` (only when k > 0) and ``order_flow``; the next event time is
    exponential in their sum and the type is drawn proportionally, with the
    tie-breaking order arrival < perish < order fixed by the thresholds.

    ``hist`` (length K) accumulates time spent at each stock level inside
    [warmup, horizon), with the last bin absorbing k >= K - 1.
    ``counts`` receives [arrivals, perished, sold, remaining,
    orders_measured, sold_measured]; the first four cover the whole run so
    that arrivals == perished + sold + remaining exactly.
    """
    state = seed
    t = 0.0
    k = 0
    cap = hist.shape[0] - 1
    n_arrived = 0
    n_perished = 0
    n_sold = 0
    n_orders_m = 0
    n_sold_m = 0
    while True:
        rate = arrival + order_flow
        if k > 0:
            rate += perish
        if rate <= 0.0:
            break
        state, u1 = _next_uniform(state)
        t_next = t - math.log1p(-u1) / rate
        if t_next >= horizon:
            break
        lo = t if t > warmup else warmup
        if t_next > lo:
            hist[k if k < cap else cap] += t_next - lo
        t = t_next
        state, u2 = _next_uniform(state)
        x = u2 * rate
        if x < arrival:
            k += 1
            n_arrived += 1
        elif k > 0 and x < arrival + perish:
            k -= 1
            n_perished += 1
        else:
            state, r = _sample_batch(state, kind, det_size, log_u, sizes, cdf)
            s = r if r < k else k
            k -= s
            n_sold += s
            if t > warmup:
                n_orders_m += 1
                n_sold_m += s
    lo = t if t > warmup else warmup
    if horizon > lo:
        hist[k if k < cap else cap] += horizon - lo
    counts[0] = n_arrived
    counts[1] = n_perished
    counts[2] = n_sold
    counts[3] = k
    counts[4] = n_orders_m
    counts[5] = n_sold_m


@jit_kernel(parallel=True)
def _sim_driver(arrival, perish, order_flow, kind, det_size, log_u, sizes, cdf,
                horizon, warmup, seeds, hist_out, counts_out):
    # one task per (replication, warehouse); tasks touch disjoint output slices
    reps, n = seeds.shape
    for task in prange(reps * n):
        r = task // n
        i = task % n
        _sim_warehouse(arrival[i], perish[i], order_flow[i], kind, det_size, log_u,
                       sizes, cdf, horizon, warmup, seeds[r, i],
                       hist_out[r, i], counts_out[r, i])


@jit_kernel()
def _project_simplex(v):
    # Euclidean projection onto {x >= 0, sum x = 1} (sort-based)
    n = v.shape[0]
    desc = np.sort(v)[::-1]
    css = np.cumsum(desc)
    rho = 0
    for j in range(n):
        if desc[j] + (1.0 - css[j]) / (j + 1.0) > 0.0:
            rho = j
    theta = (1.0 - css[rho]) / (rho + 1.0)
    out = np.empty(n)
    for j in range(n):
        x = v[j] + theta
        out[j] = x if x > 0.0 else 0.0
    return out


@jit_kernel()
def _project_simplex_weighted(y, w):
    # projection onto the simplex in the metric sum w[i] (x[i] - y[i])**2:
    # x[i] = max(0, y[i] - nu / w[i]) with nu chosen so the sum is 1.
    # Coordinates deactivate as nu passes their breakpoint w[i] * y[i].
    n = y.shape[0]
    b = w * y
    order = np.argsort(b)
    s_y = 0.0
    s_inv = 0.0
    for i in range(n):
        s_y += y[i]
        s_inv += 1.0 / w[i]
    k = 0
    while k < n - 1:
        nu = (s_y - 1.0) / s_inv
        if nu < b[order[k]]:
            break
        j = order[k]
        s_y -= y[j]
        s_inv -= 1.0 / w[j]
        k += 1
    nu = (s_y - 1.0) / s_inv
    out = np.empty(n)
    for i in range(n):
        x = y[i] - nu / w[i]
        out[i] = x if x > 0.0 else 0.0
    return out


@jit_kernel()
def _geo_cost(arrival, perish, gamma, u, slope, P):
    # unit cost minus its constant term; +inf when any warehouse is unstable
    total = 0.0
    for i in range(arrival.shape[0]):
        ratio = arrival[i] / (perish[i] * u)
        A = (gamma * P[i] + perish[i] + arrival[i] * u) / (2.0 * u * perish[i])
        disc = A * A - ratio
        if disc <= 0.0:
            return np.inf
        q = ratio / (A + math.sqrt(disc))
        if q >= 1.0:
            return np.inf
        total += arrival[i] - q * perish[i]
    return slope * total


@jit_kernel()
def _geo_grad_hess(arrival, perish, gamma, u, slope, P, grad, hess):
    # exact gradient and (diagonal) Hessian of the cost in P
    for i in range(arrival.shape[0]):
        A = (gamma * P[i] + perish[i] + arrival[i] * u) / (2.0 * u * perish[i])
        disc = A * A - arrival[i] / (perish[i] * u)
        root = math.sqrt(disc)
        dq = gamma / (2.0 * perish[i] * u) * (1.0 - A / root)
        grad[i] = -slope * perish[i] * dq
        hess[i] = -slope * gamma * gamma * arrival[i] / (
            4.0 * perish[i] * perish[i] * u * u * u * disc * root
        )


@jit_kernel()
def _pg_geometric(arrival, perish, gamma, u, slope, P0, tol, max_iters,
                  armijo, shrink):
    """Preconditioned projected-gradient descent for geometric batch laws.

    The cost is separable with an exact diagonal Hessian, so each step
    targets the Hessian-metric projection of the diagonal Newton point and
    backtracks along the segment (Armijo). Termination is the unit-step
    Euclidean projected-gradient norm. Returns
    (P, iterations, pg_residual, converged).
    """
    n = P0.shape[0]
    P = P0.copy()
    g = np.empty(n)
    h = np.empty(n)
    f = _geo_cost(arrival, perish, gamma, u, slope, P)
    _geo_grad_hess(arrival, perish, gamma, u, slope, P, g, h)
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        cand = _project_simplex(P - g)
        residual = 0.0
        for j in range(n):
            d = abs(cand[j] - P[j])
            if d > residual:
                residual = d
        if residual < tol:
            return P, iterations, residual, True
        target = _project_simplex_weighted(P - g / h, h)
        moved = 0.0
        for j in range(n):
            d = abs(target[j] - P[j])
            if d > moved:
                moved = d
        if moved == 0.0:
            break
        t = 1.0
        while True:
            P_new = P + t * (target - P)
            f_new = _geo_cost(arrival, perish, gamma, u, slope, P_new)
            slope_term = 0.0
            for j in range(n):
                slope_term += g[j] * (P_new[j] - P[j])
            limit = f + armijo * slope_term
            if limit == f:
                # predicted decrease below float resolution of the cost: the
                # Armijo test only sees rounding noise here, so trust the
                # Newton step (it keeps contracting on its own)
                if f_new < np.inf:
                    break
            elif f_new <= limit:
                break
            t *= shrink
            if t < 1e-20:
                return P, iterations, residual, False
        P = P_new
        f = f_new
        _geo_grad_hess(arrival, perish, gamma, u, slope, P, g, h)
    cand = _project_simplex(P - g)
    residual = float(np.max(np.abs(cand - P)))
    return P, iterations, residual, residual < tol
