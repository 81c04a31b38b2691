"""Exact oracles for extinction times.

Three independent routes are kept deliberately separate so they can check
each other and the simulators:

* a hitting-time recursion for the infected-count chain on a complete
  graph, carried in log space so it survives sizes in the hundreds;
* the spectral (eigenvalue-sum) representation of the same absorption
  time, which also yields exact-in-distribution samples of extinction
  times far beyond any simulable horizon;
* a direct linear solve of the 2^|V|-state jump chain on arbitrary tiny
  graphs.
"""

from __future__ import annotations

import math
import sys

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import spsolve

from .errors import BudgetExceededError
from .graphs import Graph
from .rng import mix64

_MAX_EXP = math.log(sys.float_info.max)


def log_exact_clique_extinction(m: int, lam: float) -> float:
    """log E[extinction time] for the infected count on a complete graph of
    size m started fully infected.

    The count k moves up at rate lam*k*(m-k) and down at rate k with 0
    absorbing.  With h_k the mean passage time from k to k-1,
    h_k = (1 + up_k * h_{k+1}) / k, and the answer is sum_k h_k; both are
    accumulated in log space.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    log_h = -math.log(m)  # h_m = 1/m
    total = log_h
    for k in range(m - 1, 0, -1):
        up = lam * k * (m - k)
        if up > 0.0:
            log_h = np.logaddexp(0.0, math.log(up) + log_h) - math.log(k)
        else:
            log_h = -math.log(k)
        total = np.logaddexp(total, log_h)
    return float(total)


def exact_clique_extinction(m: int, lam: float) -> float:
    """Linear-space expected extinction time; refuses if it overflows."""
    lv = log_exact_clique_extinction(m, lam)
    if lv > _MAX_EXP:
        raise OverflowError(f"log mean = {lv:.3f} exceeds double range; use the log form")
    return math.exp(lv)


def clique_extinction_rates(m: int, lam: float) -> np.ndarray:
    """Eigenvalues of the killed infected-count generator on {1..m}.

    The absorption time from full occupancy is distributed as the sum of m
    independent exponentials with these rates, so they give both exact
    moments and exact samples.  Rates come from the symmetrized tridiagonal
    form; in metastable regimes the escape rate sits exponentially far
    below the dense-solver error floor, so the smallest rate is recovered
    instead from the exact log-space mean through the rate-sum identity
    sum_i 1/rate_i = E[absorption time].
    """
    if m < 1:
        raise ValueError("m must be positive")
    k = np.arange(1, m + 1, dtype=float)
    up = lam * k * (m - k)  # up[m-1] = 0
    down = k
    diag = -(up + down)
    off = np.sqrt(up[:-1] * down[1:])
    evals = eigh_tridiagonal(diag, off, eigvals_only=True)
    rates = np.sort(-evals)
    if m == 1:
        return np.array([1.0])
    scale = float(np.abs(diag).max())
    floor = 1e-8 * scale
    if rates[1] <= floor:
        raise ArithmeticError(
            "two near-zero rates: spectral splitting not resolvable in doubles"
        )
    log_mean = log_exact_clique_extinction(m, lam)
    tail = float((1.0 / rates[1:]).sum())
    # residual mean attributable to the slowest mode, in log space
    if log_mean > math.log(tail) + 36.0:  # tail negligible at double precision
        log_slow = log_mean
    else:
        slow = math.exp(log_mean) - tail
        if slow <= 0:
            raise ArithmeticError("rate-sum identity violated beyond tolerance")
        log_slow = math.log(slow)
    rates[0] = math.exp(-log_slow)
    return rates


def sample_clique_extinction_times(m: int, lam: float, count: int, seed: int) -> np.ndarray:
    """Exact-in-distribution extinction-time samples for the full-start
    complete graph, drawn as sums of independent exponentials with the
    spectral rates.  Usable in regimes where direct simulation would need
    astronomically many events."""
    if count < 0:
        raise ValueError("count must be non-negative")
    rates = clique_extinction_rates(m, lam)
    rng = np.random.default_rng(mix64(seed, 0x50485459))
    u = rng.random((count, m))
    return (-np.log1p(-u) / rates).sum(axis=1)


def exact_expected_extinction_ctmc(g: Graph, lam: float, cap: int = 12,
                                   hard_cap: int = 20) -> float:
    """Expected extinction time from full occupancy by solving the linear
    system of the 2^|V|-state jump chain (generator restricted to the
    transient states, right-hand side -1).

    Refuses graphs above `cap` vertices unless the caller raises it, and
    never accepts more than `hard_cap`.
    """
    n = g.vertex_count
    if n == 0:
        return 0.0
    limit = min(cap, hard_cap)
    if n > limit:
        raise BudgetExceededError(f"{n} vertices exceed the CTMC budget of {limit}")
    size = 1 << n
    rows, cols, vals = [], [], []
    diag = np.zeros(size - 1)
    for state in range(1, size):
        s = state - 1
        total = 0.0
        for v in range(n):
            bit = 1 << v
            if state & bit:
                total += 1.0
                target = state & ~bit
                if target:
                    rows.append(s)
                    cols.append(target - 1)
                    vals.append(1.0)
            else:
                infected_nbrs = sum(1 for w in g.adjacency[v] if state >> w & 1)
                if infected_nbrs:
                    rate = lam * infected_nbrs
                    total += rate
                    rows.append(s)
                    cols.append((state | bit) - 1)
                    vals.append(rate)
        diag[s] = -total
    A = csr_matrix((vals, (rows, cols)), shape=(size - 1, size - 1))
    A += csr_matrix((diag, (np.arange(size - 1), np.arange(size - 1))),
                    shape=(size - 1, size - 1))
    h = spsolve(A.tocsc(), -np.ones(size - 1))
    return float(h[size - 2])  # full-occupancy state is 2^n - 1
