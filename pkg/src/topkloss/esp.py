"""Elementary symmetric polynomials sigma_0..sigma_{k+p} in log space.

Two independent forward algorithms over a strictly positive input vector e
(supplied as log e):

* `esp_forward_dc` -- divide and conquer.  Each input contributes a linear
  factor X + 1/e_i; factors are merged pairwise with products truncated at
  degree k+p.  By Vieta, coefficient j of prod_i (X + 1/e_i) is
  sigma_{n-j}(1/e), and multiplying through by sigma_n(e) = prod_i e_i turns
  that into sigma_j(e).  Working with reciprocal roots means only the k+p
  lowest-degree coefficients are ever needed, giving O((k+p) n) work across
  O(log n) merge levels.

* `esp_forward_sum` -- the sequential one-element-at-a-time recurrence
  sigma_{j,i} = sigma_{j,i-1} + e_i * sigma_{j-1,i-1}, run in log space.
  Same contract, independent code path; used as an equivalence baseline and
  in benchmarks.

Both accept a single vector (n,) or a batch (B, n) and are pure functions:
no shared state, deterministic output for a fixed input order and dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .logspace import logsumexp_last, poly_mul_trunc_arr


@dataclass(frozen=True)
class EspResult:
    """Log-domain sigma_0..sigma_{k+p} plus what the backward pass needs.

    ``log_sigma`` has shape (..., k+p+1) and ``log_inputs`` shape (..., n),
    with identical leading batch dimensions.  ``log_sigma[..., 0]`` is
    exactly 0 (sigma_0 = 1 by definition).
    """

    n: int
    k: int
    p: int
    log_sigma: np.ndarray
    log_inputs: np.ndarray

    @property
    def order_cap(self) -> int:
        return self.k + self.p


def _validated(log_e, k: int, p: int, dtype) -> tuple[np.ndarray, bool]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    arr = np.asarray(log_e, dtype=dtype)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("log_e must be a vector or a batch of vectors")
    n = arr.shape[1]
    if k + p > n:
        raise ValueError(f"need k + p <= n, got k={k}, p={p}, n={n}")
    if not np.isfinite(arr).all():
        raise ValueError("esp forward requires finite log inputs (e_i > 0)")
    return arr, squeeze


def esp_forward_dc(log_e, k: int, p: int = 0, dtype=np.float64) -> EspResult:
    """Divide-and-conquer forward pass.

    Pairwise merges of the reciprocal-root linear factors, truncated at
    degree k+p, then a final adjustment by log sigma_n = sum(log e).  An
    unpaired polynomial at an odd merge level is carried to the next level
    unchanged.
    """
    arr, squeeze = _validated(log_e, k, p, dtype)
    bsz, n = arr.shape
    kmax = k + p

    # Linear factor X + 1/e_i: constant coeff 1/e_i, degree-1 coeff 1.
    polys = np.stack([-arr, np.zeros_like(arr)], axis=-1)  # (B, n, 2)
    m = n
    while m > 1:
        pairs = m // 2
        carry = polys[:, 2 * pairs :, :] if m % 2 else None
        merged = poly_mul_trunc_arr(polys[:, 0 : 2 * pairs : 2], polys[:, 1 : 2 * pairs : 2], kmax)
        if carry is not None:
            pad = merged.shape[-1] - carry.shape[-1]
            if pad > 0:
                carry = np.pad(carry, ((0, 0), (0, 0), (0, pad)), constant_values=-np.inf)
            merged = np.concatenate([merged, carry], axis=1)
        polys = merged
        m = polys.shape[1]

    coeffs = polys[:, 0, :]  # (B, kmax+1): coefficient j = log sigma_{n-j}(1/e)
    log_sigma = arr.sum(axis=1, keepdims=True) + coeffs
    log_sigma[:, 0] = 0.0  # sigma_0 = 1, pinned exactly
    if squeeze:
        log_sigma = log_sigma[0]
        arr = arr[0]
    return EspResult(n=n, k=k, p=p, log_sigma=log_sigma, log_inputs=arr)


def esp_forward_sum(log_e, k: int, p: int = 0, dtype=np.float64) -> EspResult:
    """Sequential summation forward pass (same contract as esp_forward_dc)."""
    arr, squeeze = _validated(log_e, k, p, dtype)
    bsz, n = arr.shape
    kmax = k + p

    sig = np.full((bsz, kmax + 1), -np.inf, dtype=dtype)
    sig[:, 0] = 0.0
    for i in range(n):
        sig[:, 1:] = np.logaddexp(sig[:, 1:], sig[:, :-1] + arr[:, i : i + 1])
    if squeeze:
        sig = sig[0]
        arr = arr[0]
    return EspResult(n=n, k=k, p=p, log_sigma=sig, log_inputs=arr)


def esp_forward_sum_linear(e, kmax: int, dtype=np.float64) -> np.ndarray:
    """Summation recurrence in plain linear space (debug / stability probe).

    Returns sigma_0..sigma_kmax of each row of ``e``.  Deliberately not
    log-stabilized: overflow to inf is the observable the stability sweep
    looks for, mirroring the behaviour of the naive algorithm at small
    temperatures.
    """
    arr = np.asarray(e, dtype=dtype)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    bsz, n = arr.shape
    sig = np.zeros((bsz, kmax + 1), dtype=dtype)
    sig[:, 0] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            sig[:, 1:] = sig[:, 1:] + arr[:, i : i + 1] * sig[:, :-1]
    return sig[0] if squeeze else sig


def log_binomial(n: int, j) -> np.ndarray:
    """log C(n, j), vectorized over j (sanity bounds in tests use this)."""
    from math import lgamma

    js = np.atleast_1d(np.asarray(j, dtype=np.int64))
    out = np.array([lgamma(n + 1) - lgamma(x + 1) - lgamma(n - x + 1) for x in js])
    return out if np.ndim(j) else out[0]
