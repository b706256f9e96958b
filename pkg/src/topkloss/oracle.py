"""Brute-force references: subset enumeration, tuple-enumerated loss,
removal-based derivatives, and finite differences.

Everything here trades speed for independence: no log-space tricks, no
divide and conquer, no recursions shared with the fast paths.  All oracles
run in 64-bit regardless of any configured precision, and all guard against
combinatorial blowup.  Test-only code; single-threaded by design.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations

import numpy as np

MAX_ORACLE_N = 25
MAX_ORACLE_TUPLES = 10**6


class SubsetIterator:
    """Yields all k-subsets of range(n) in lexicographic order."""

    def __init__(self, n: int, k: int):
        if not 0 <= k <= n:
            raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
        self.n = n
        self.k = k
        self._it = combinations(range(n), k)

    def __iter__(self):
        return self._it

    def count(self) -> int:
        return math.comb(self.n, self.k)


@lru_cache(maxsize=None)
def _subset_index(n: int, k: int) -> np.ndarray:
    """All k-subsets of range(n) as an int array of shape (C(n,k), k)."""
    return np.array(list(combinations(range(n), k)), dtype=np.intp).reshape(-1, k)


def brute_sigma(e, j: int) -> float:
    """sigma_j(e) by explicit enumeration of all j-subsets."""
    e = np.asarray(e, dtype=np.float64)
    n = e.shape[0]
    if n > MAX_ORACLE_N:
        raise ValueError(f"brute_sigma is capped at n <= {MAX_ORACLE_N}, got {n}")
    if not 0 <= j <= n:
        raise ValueError(f"need 0 <= j <= n, got j={j}, n={n}")
    if j == 0:
        return 1.0
    idx = _subset_index(n, j)
    return float(np.sum(np.prod(e[idx], axis=1)))


def brute_delta(e, j: int, i: int) -> float:
    """d sigma_j / d e_i = sigma_{j-1} of e with element i removed."""
    e = np.asarray(e, dtype=np.float64)
    return brute_sigma(np.delete(e, i), j - 1)


def brute_smooth_loss(s, y: int, cfg) -> float:
    """Smoothed top-k loss by direct enumeration over k-tuples.

    Two max-shifted log-sum-exps: one over all k-tuples of classes with the
    margin added to tuples missing the ground truth, one over the tuples that
    contain it.
    """
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    k, tau, alpha = cfg.k, cfg.tau, cfg.alpha
    if math.comb(n, k) > MAX_ORACLE_TUPLES:
        raise ValueError("instance too large for tuple enumeration")
    idx = _subset_index(n, k)
    tuple_sums = s[idx].sum(axis=1) / (k * tau)
    has_y = (idx == y).any(axis=1)
    all_terms = tuple_sums + (alpha / tau) * (~has_y)
    y_terms = tuple_sums[has_y]
    return float(tau * (_lse(all_terms) - _lse(y_terms)))


def _lse(v: np.ndarray) -> float:
    m = v.max()
    return float(m + np.log(np.sum(np.exp(v - m))))


def finite_diff_grad(f, s, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of a score vector."""
    if h <= 0:
        raise ValueError("h must be positive")
    s = np.asarray(s, dtype=np.float64)
    g = np.empty_like(s)
    for j in range(s.shape[0]):
        bump = np.zeros_like(s)
        bump[j] = h
        g[j] = (f(s + bump) - f(s - bump)) / (2 * h)
    return g


def brute_marginals(s, k: int) -> np.ndarray:
    """Top-k membership marginals by tuple enumeration, normalized."""
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    if math.comb(n, k) > MAX_ORACLE_TUPLES:
        raise ValueError("instance too large for tuple enumeration")
    idx = _subset_index(n, k)
    weights = np.exp(s[idx].sum(axis=1) - s[idx].sum(axis=1).max())
    probs = np.zeros(n)
    for col in range(k):
        np.add.at(probs, idx[:, col], weights)
    return probs / probs.sum()
