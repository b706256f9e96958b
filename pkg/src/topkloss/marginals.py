"""Marginal probability of each label making the top-k prediction.

For scores s, the unnormalized membership weight of class i is the sum of
exp(sum of scores) over all k-tuples containing i, which collapses to
exp(s_i) * sigma_{k-1}(exp(s) with i removed).  Dividing by sigma_k(exp(s))
-- the log-derivative form, numerically tame because every ratio is bounded
by k -- and normalizing by the sum gives a proper distribution.  The removal
factor sigma_{k-1}(e without i) is exactly the backward-pass derivative
delta_{k,i}, so one O(kn) forward/backward pair covers all classes.

k = 1 reduces to the softmax; k = n gives the uniform distribution.
Averaging the per-view marginals (and renormalizing) aggregates several
score vectors for the same example into a single prediction distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .esp import esp_forward_dc
from .esp_grad import default_p_order, esp_backward


@dataclass(frozen=True)
class MarginalDist:
    """A distribution over classes: nonnegative, sums to one."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a nonempty vector")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-8:
            raise ValueError("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)


def topk_marginals_batch(scores, k: int, p_order: int | None = None) -> np.ndarray:
    """Row-wise top-k membership marginals for a (B, n) score matrix."""
    s = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    n = s.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    p = min(p_order if p_order is not None else default_p_order(k), n - k)
    # e = exp(s), so s itself is the log-domain input.
    esp = esp_forward_dc(s, k, p)
    table = esp_backward(esp)
    log_unnorm = s + table.delta[:, k - 1, :] - esp.log_sigma[:, k : k + 1]
    shifted = log_unnorm - log_unnorm.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def topk_marginals(s, k: int, p_order: int | None = None) -> MarginalDist:
    """Marginals of one score vector (see module docstring)."""
    return MarginalDist(topk_marginals_batch(np.asarray(s)[None, :], k, p_order)[0])


def aggregate_crops(score_vectors, k: int) -> MarginalDist:
    """Mean of per-vector marginals, renormalized.

    This is the multi-view aggregation rule: each view contributes its own
    membership distribution and the final prediction averages them.
    """
    vecs = list(score_vectors)
    if not vecs:
        raise ValueError("aggregate_crops needs at least one score vector")
    stacked = np.asarray(vecs, dtype=np.float64)
    if stacked.ndim != 2:
        raise ValueError("score vectors must share a common length")
    probs = topk_marginals_batch(stacked, k).mean(axis=0)
    return MarginalDist(probs / probs.sum())
