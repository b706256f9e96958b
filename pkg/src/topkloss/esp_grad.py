"""Derivatives of the elementary symmetric polynomials.

d sigma_j / d e_i equals sigma_{j-1} of e with element i removed, and obeys
the downward recursion

    delta_{j,i} = sigma_{j-1}(e) - e_i * delta_{j-1,i},    delta_{1,i} = 1,

which reuses the forward results and costs O(kn).  The subtraction is the
weak point: when e_i dominates the other inputs the two operands nearly
cancel and the recursion amplifies rounding like e_i^{j-1}.  Flagged entries
(and every higher order for the same column, since one contaminated value
poisons the rest of the recursion) are replaced by the truncated alternating
series obtained by unrolling the recursion upward,

    sum_{m=0}^{p} (-1)^m sigma_{j+m}(e) / e_i^{m+1},

whose absolute error is exactly sigma_{j+p}(e with i removed) / e_i^{p+1} --
small precisely in the regime where the recursion fails.  The series is
accumulated by pairing consecutive terms so every partial difference is
nonnegative; if an inverted pair shows the dominance assumption does not
hold, the entry falls back to an exact forward pass over e with element i
removed (rare by construction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .esp import EspResult, esp_forward_dc
from .logspace import LogReal, default_threshold, log_sub_exp, logsubexp_arr

ORDER_RECURSION = 0  # entry produced by the plain recursion
ORDER_EXACT_REMOVAL = -1  # entry recomputed by a removal forward pass


def default_p_order(k: int) -> int:
    """Extra forward orders kept for the gradient approximation (~0.2 k)."""
    return max(1, round(0.2 * k))


def instability_policy(cfg) -> float:
    """Relative-difference threshold below which the recursion is distrusted.

    Honors an explicit ``cfg.instability_threshold`` when set, otherwise the
    per-precision default (1e-4 single, 1e-11 double).
    """
    override = getattr(cfg, "instability_threshold", None)
    if override is not None:
        return float(override)
    return default_threshold(getattr(cfg, "dtype", np.float64))


@dataclass(frozen=True)
class GradTable:
    """delta[..., j-1, i] = log of d sigma_j / d e_i, for j = 1..k.

    ``unstable_mask`` marks entries produced by the approximation path (the
    series or its exact-removal fallback); ``order_used`` records the series
    order per entry, 0 for recursion entries and -1 for exact removals.
    """

    delta: np.ndarray
    unstable_mask: np.ndarray
    order_used: np.ndarray

    @property
    def unstable_count(self) -> int:
        return int(self.unstable_mask.sum())


def _approx_series(log_sigma: np.ndarray, log_e: np.ndarray, j: int, p: int):
    """Vectorized truncated series for order j, all columns at once.

    Returns the log-domain series values and a mask of entries where a
    paired difference came out inverted (series inapplicable there).
    """
    terms = [log_sigma[:, j + m][:, None] - (m + 1) * log_e for m in range(p + 1)]
    acc = np.full(log_e.shape, -np.inf, dtype=log_e.dtype)
    needs_exact = np.zeros(log_e.shape, dtype=bool)
    m = 0
    while m <= p:
        if m + 1 <= p:
            pair, _ = logsubexp_arr(terms[m], terms[m + 1], 0.0)
            needs_exact |= terms[m + 1] > terms[m]
            acc = np.logaddexp(acc, pair)
            m += 2
        else:
            acc = np.logaddexp(acc, terms[m])
            m += 1
    return acc, needs_exact


def _exact_removal(log_e_row: np.ndarray, j: int, i: int) -> float:
    """log sigma_{j-1}(e with element i removed), by a dedicated forward."""
    sub = np.delete(log_e_row, i)
    if j - 1 == 0:
        return 0.0
    res = esp_forward_dc(sub, k=j - 1, p=0, dtype=log_e_row.dtype)
    return float(res.log_sigma[j - 1])


def _exact_removal_batch(log_e: np.ndarray, j: int, rows: np.ndarray, cols: np.ndarray):
    """log sigma_{j-1} of e with one element removed, for many (row, col) pairs.

    One batched forward over the row-deleted copies; O(j n) per entry but
    fully vectorized across entries.
    """
    n = log_e.shape[1]
    picked = log_e[rows]
    keep = np.ones(picked.shape, dtype=bool)
    keep[np.arange(rows.shape[0]), cols] = False
    sub = picked[keep].reshape(rows.shape[0], n - 1)
    res = esp_forward_dc(sub, k=j - 1, p=0, dtype=log_e.dtype)
    return res.log_sigma[:, j - 1]


def esp_backward(esp: EspResult, threshold: float | None = None) -> GradTable:
    """All derivatives delta_{j,i} for j = 1..k, log domain.

    Pure function of the forward result; batch rows are independent.  Each
    entry is produced by the cheapest path whose error estimate clears the
    precision target (the instability threshold, read as a relative error):

    * the recursion, carrying a running rounding-error estimate
      err_j = eps sigma_{j-1}(e) + e_i err_{j-1} (the e_i re-amplification
      is exactly the mechanism that makes dominant columns blow up);
    * the truncated series, whose error is bounded by
      sigma_{j+p}(e)/e_i^{p+1} and is exactly zero once j+p >= n (the series
      terminates: sigma of an (n-1)-vector vanishes beyond order n-1);
    * a dedicated removal forward pass, exact, for the moderate-dominance
      band where neither estimate is good enough (rare by construction).

    A near-cancellation flag from the subtraction forces the column off the
    recursion as well, and once a column leaves it, every higher order in
    that column stays on the approximation path.
    """
    log_e = np.atleast_2d(esp.log_inputs)
    log_sigma = np.atleast_2d(esp.log_sigma)
    squeeze = esp.log_inputs.ndim == 1
    bsz, n = log_e.shape
    k, p = esp.k, esp.p
    if threshold is None:
        threshold = default_threshold(log_e.dtype)
    log_thr = float(np.log(threshold)) if threshold > 0 else -np.inf

    delta = np.full((bsz, k, n), -np.inf, dtype=log_e.dtype)
    delta[:, 0, :] = 0.0
    unstable = np.zeros((bsz, k, n), dtype=bool)
    order_used = np.full((bsz, k, n), ORDER_RECURSION, dtype=np.int8)
    contaminated = np.zeros((bsz, n), dtype=bool)

    # log absolute rounding error carried by recursion values; delta_1 = 1
    # is exact.  The 4x is slack for the log/exp round trips.
    log_eps = float(np.log(4 * np.finfo(log_e.dtype).eps))
    err = np.full((bsz, n), -np.inf, dtype=log_e.dtype)

    for j in range(2, k + 1):
        b_in = log_e + delta[:, j - 2, :]
        a_in = np.broadcast_to(log_sigma[:, j - 1 : j], b_in.shape)
        val, stable = logsubexp_arr(a_in, b_in, threshold)
        rec_err = np.logaddexp(log_eps + a_in, log_e + err)
        if j + p >= n:
            series_err = np.full((bsz, n), -np.inf, dtype=log_e.dtype)
        else:
            series_err = log_sigma[:, j + p : j + p + 1] - (p + 1) * log_e

        # Accuracy target, relative to the entry magnitude (val is -inf where
        # the subtraction collapsed; sigma_{j-1} is a sound stand-in there).
        magnitude = np.where(np.isneginf(val), a_in, val)
        target = log_thr + magnitude
        contaminated |= ~stable
        if threshold > 0:  # threshold 0 disables everything but b > a flags
            contaminated |= rec_err > np.minimum(series_err, target)

        if contaminated.any():
            approx, inapplicable = _approx_series(log_sigma, log_e, j, p)
            removal = contaminated & (inapplicable | (series_err > np.maximum(target, rec_err)))
            if removal.any():
                rows, cols = np.nonzero(removal)
                approx[rows, cols] = _exact_removal_batch(log_e, j, rows, cols)
            val = np.where(contaminated, approx, val)
            err = np.where(
                contaminated, np.where(removal, log_eps + approx, series_err), rec_err
            )
            unstable[:, j - 1, :] = contaminated
            order_used[:, j - 1, :] = np.where(
                contaminated, np.where(removal, ORDER_EXACT_REMOVAL, p), ORDER_RECURSION
            )
        else:
            err = rec_err
        delta[:, j - 1, :] = val

    if squeeze:
        return GradTable(delta[0], unstable[0], order_used[0])
    return GradTable(delta, unstable, order_used)


def grad_approx(esp: EspResult, i: int, j: int, p: int) -> LogReal:
    """p-th order series approximation to delta_{j,i} for one entry.

    Consecutive terms are paired so each difference is a nonnegative
    quantity before log-accumulation; an inverted pair triggers the exact
    removal fallback.  Requires sigma up to order j+p in ``esp``.
    """
    if esp.log_sigma.ndim != 1:
        raise ValueError("grad_approx takes a single-vector EspResult")
    if p < 0 or j + p > esp.order_cap:
        raise ValueError(f"order j+p={j + p} exceeds stored orders ({esp.order_cap})")
    if not 1 <= j <= esp.order_cap:
        raise ValueError(f"need 1 <= j <= {esp.order_cap}, got {j}")
    if j == 1:
        return LogReal(0.0)

    log_ei = float(esp.log_inputs[i])
    terms = [float(esp.log_sigma[j + m]) - (m + 1) * log_ei for m in range(p + 1)]
    if any(terms[m + 1] > terms[m] for m in range(0, p, 2)):
        return LogReal(_exact_removal(esp.log_inputs, j, i))
    parts = []
    m = 0
    while m <= p:
        if m + 1 <= p:
            diff, _ = log_sub_exp(terms[m], terms[m + 1], 0.0)
            parts.append(diff.value)
            m += 2
        else:
            parts.append(terms[m])
            m += 1
    acc = -np.inf
    for v in parts:
        acc = np.logaddexp(acc, v)
    return LogReal(float(acc))
