"""The top-k loss family.

Notation: scores s in R^n, ground-truth label y, rank k, temperature tau,
margin alpha.  The task loss is the binary top-k error (1 iff the k-th
largest score strictly exceeds s_y).  Its hard surrogate is the rescaled
hinge

    l_k(s, y) = max{ (s_without_y / k + alpha)_[k] - s_y / k, 0 },

and the smooth surrogate replaces the two maximizations of the equivalent
tuple form with temperature-tau log-sum-exps.  Separating the tuples that
contain y from those that do not reduces the smooth loss to two elementary
symmetric polynomials of e = exp(s_without_y / (k tau)):

    L = tau * log[ exp(s_y/(k tau)) sigma_{k-1}(e) + exp(alpha/tau) sigma_k(e) ]
      - tau * log[ exp(s_y/(k tau)) sigma_{k-1}(e) ],

evaluated here entirely in log space as tau * softplus(v - u) with
u = s_y/(k tau) + log sigma_{k-1} and v = alpha/tau + log sigma_k.  Setting
(k, tau, alpha) = (1, 1, 0) recovers the cross-entropy loss exactly.

Gradients chain the softplus through the sigma derivatives of the backward
recursion; everything stays O(kn) per sample and batches evaluate all
samples in one vectorized pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .esp import esp_forward_dc
from .esp_grad import default_p_order, esp_backward, instability_policy
from .logspace import logsumexp_last


@dataclass(frozen=True)
class LossConfig:
    """Parameters shared by every loss evaluation.

    ``p_order`` is the number of extra sigma orders kept for the backward
    approximation (default ~0.2 k); ``instability_threshold`` overrides the
    per-precision default when set.  Precision is explicit, never inferred.
    """

    k: int
    tau: float = 1.0
    alpha: float = 1.0
    p_order: int | None = None
    precision: str = "f64"
    instability_threshold: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.precision not in ("f32", "f64"):
            raise ValueError(f"precision must be 'f32' or 'f64', got {self.precision!r}")
        if self.p_order is not None and self.p_order < 0:
            raise ValueError("p_order must be >= 0")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def effective_p(self, n_esp: int) -> int:
        """Approximation order, clamped so the forward stays in contract."""
        p = self.p_order if self.p_order is not None else default_p_order(self.k)
        return max(0, min(p, n_esp - self.k))


@dataclass(frozen=True)
class ScoreBatch:
    """A batch of score vectors with ground-truth labels (0-based)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.intp)
        if scores.ndim != 2:
            raise ValueError("scores must be a (samples, classes) matrix")
        if labels.shape != (scores.shape[0],):
            raise ValueError("labels must be one index per sample")
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        if scores.shape[0] and (labels.min() < 0 or labels.max() >= scores.shape[1]):
            raise ValueError("labels out of range")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def __len__(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class GradResult:
    """Per-sample losses and score gradients, plus instability diagnostics."""

    loss: np.ndarray
    grad: np.ndarray
    unstable_count: int


def topk_prediction(s, k: int) -> set[int]:
    """Indices of the k largest scores; ties broken by lowest index."""
    s = np.asarray(s, dtype=np.float64)
    if not 1 <= k <= s.shape[0]:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={s.shape[0]}")
    order = np.argsort(-s, kind="stable")
    return set(int(i) for i in order[:k])


def task_loss(s, y: int, k: int) -> int:
    """Binary top-k error: 1 iff the k-th largest score strictly beats s_y."""
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    kth = np.partition(s, n - k)[n - k]
    return int(kth > s[y])


def _split_label(scores: np.ndarray, labels: np.ndarray):
    """Remove the label column per row; returns (s_y, s_rest, keep_mask)."""
    bsz, n = scores.shape
    keep = np.arange(n)[None, :] != labels[:, None]
    s_y = scores[np.arange(bsz), labels]
    s_rest = scores[keep].reshape(bsz, n - 1)
    return s_y, s_rest, keep


def hard_loss(s, y: int, cfg: LossConfig) -> float:
    """Rescaled hard top-k hinge with margin alpha, O(n) via selection."""
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    if not 1 <= cfg.k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={cfg.k}, n={n}")
    rest = np.delete(s, y)
    kth = np.partition(rest, rest.shape[0] - cfg.k)[rest.shape[0] - cfg.k]
    return float(max(kth / cfg.k + cfg.alpha - s[y] / cfg.k, 0.0))


def hard_loss_reformulated(s, y: int, cfg: LossConfig) -> float:
    """Same value via the difference of two tuple maximizations.

    The maximum over all k-tuples decomposes into the best tuple containing
    the ground truth (margin 0) versus the best tuple avoiding it (margin
    alpha); both reduce to top-k partial sums, no enumeration.
    """
    s = np.asarray(s, dtype=np.float64)
    n = s.shape[0]
    k = cfg.k
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    rest_desc = np.sort(np.delete(s, y))[::-1]
    best_with_y = (s[y] + rest_desc[: k - 1].sum()) / k
    best_without_y = cfg.alpha + rest_desc[:k].sum() / k
    return float(max(best_with_y, best_without_y) - best_with_y)


def _smooth_forward(scores: np.ndarray, labels: np.ndarray, cfg: LossConfig):
    """Shared forward machinery; returns everything the gradient needs."""
    bsz, n = scores.shape
    if not 1 <= cfg.k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={cfg.k}, n={n}")
    dtype = cfg.dtype
    k, tau = cfg.k, cfg.tau
    p = cfg.effective_p(n - 1)

    s_y, s_rest, keep = _split_label(scores, labels)
    log_e = (s_rest / (k * tau)).astype(dtype)
    esp = esp_forward_dc(log_e, k, p, dtype=dtype)
    log_sigma = esp.log_sigma  # (B, k+p+1)

    u = (s_y / (k * tau)).astype(dtype) + log_sigma[:, k - 1]
    v = dtype(cfg.alpha / tau) + log_sigma[:, k]
    w = v - u
    loss = tau * np.logaddexp(dtype(0.0), w)
    return esp, log_e, log_sigma, w, loss, keep


def smooth_loss(s, y: int, cfg: LossConfig) -> float:
    """Smoothed top-k loss of one score vector (see module docstring)."""
    s = np.asarray(s, dtype=np.float64)
    *_, loss, _ = _smooth_forward(s[None, :], np.array([y], dtype=np.intp), cfg)
    return float(loss[0])


def smooth_loss_batch(batch: ScoreBatch, cfg: LossConfig) -> np.ndarray:
    """Per-sample smooth losses for a batch (forward only)."""
    if len(batch) == 0:
        return np.zeros(0, dtype=cfg.dtype)
    *_, loss, _ = _smooth_forward(batch.scores, batch.labels, cfg)
    return loss


def smooth_loss_grad(batch: ScoreBatch, cfg: LossConfig) -> GradResult:
    """Per-sample smooth loss and exact gradient d L / d s.

    The gradient assembles the two softplus branches from the sigma
    derivatives delta_{k-1,.} and delta_{k,.} of e = exp(s_without_y/(k tau))
    together with the direct s_y path.  Gradients sum to zero per sample
    (shift invariance).  NaN in the output is a defect, never a legal value.
    """
    scores, labels = batch.scores, batch.labels
    bsz, n = scores.shape
    if bsz == 0:
        return GradResult(np.zeros(0, dtype=cfg.dtype), np.zeros((0, n), dtype=cfg.dtype), 0)
    dtype = cfg.dtype
    k = cfg.k

    esp, log_e, log_sigma, w, loss, keep = _smooth_forward(scores, labels, cfg)
    table = esp_backward(esp, threshold=instability_policy(cfg))

    # pv = sigmoid(w): weight of the margin branch.
    pv = np.exp(w - np.logaddexp(dtype(0.0), w))
    # e_j * delta_{k,j} / sigma_k, self-normalized through the identity
    # sum_j e_j delta_{k,j} = k sigma_k: the shift makes every exponent <= 0,
    # so the ratios stay bounded by k even when the raw logs carry the large
    # absolute rounding of a 32-bit run at tiny temperatures.
    r_v = log_e + table.delta[:, k - 1, :]
    term_v = k * np.exp(r_v - logsumexp_last(r_v)[:, None])
    if k >= 2:
        r_u = log_e + table.delta[:, k - 2, :]
        term_u = (k - 1) * np.exp(r_u - logsumexp_last(r_u)[:, None])
    else:
        term_u = np.zeros_like(term_v)  # sigma_0 = 1 has no dependence on e

    grad = np.empty((bsz, n), dtype=dtype)
    grad[keep] = ((pv[:, None] / k) * (term_v - term_u)).ravel()
    grad[np.arange(bsz), labels] = -pv / k

    if np.isnan(loss).any() or np.isnan(grad).any():
        raise FloatingPointError("smooth_loss_grad produced NaN; this is a defect")
    return GradResult(loss=loss, grad=grad, unstable_count=table.unstable_count)


def cross_entropy(s, y: int) -> float:
    """Multinomial logistic loss -log softmax_y(s), via log-sum-exp."""
    s = np.asarray(s, dtype=np.float64)
    m = s.max()
    return float(m + np.log(np.sum(np.exp(s - m))) - s[y])


def cross_entropy_grad(scores: np.ndarray, labels: np.ndarray):
    """Batched cross-entropy losses and gradients (softmax minus one-hot)."""
    scores = np.asarray(scores, dtype=np.float64)
    m = scores.max(axis=1, keepdims=True)
    ex = np.exp(scores - m)
    z = ex.sum(axis=1, keepdims=True)
    probs = ex / z
    rows = np.arange(scores.shape[0])
    loss = np.log(z[:, 0]) + m[:, 0] - scores[rows, labels]
    grad = probs
    grad[rows, labels] -= 1.0
    return loss, grad
