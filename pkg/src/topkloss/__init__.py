"""Smooth top-k classification losses on stable log-space symmetric polynomials.

The package computes the smoothed top-k SVM loss family and its exact
gradients in O(kn) per sample, via elementary symmetric polynomials
evaluated end-to-end in log space, plus top-k membership marginals,
brute-force verification oracles, and a small synthetic training harness.
"""

__version__ = "0.1.0"

from .esp import EspResult, esp_forward_dc, esp_forward_sum
from .esp_grad import (
    GradTable,
    default_p_order,
    esp_backward,
    grad_approx,
    instability_policy,
)
from .logspace import LogCoeffs, LogReal, log_sub_exp, log_sum_exp, truncated_poly_mul
from .losses import (
    GradResult,
    LossConfig,
    ScoreBatch,
    cross_entropy,
    hard_loss,
    hard_loss_reformulated,
    smooth_loss,
    smooth_loss_batch,
    smooth_loss_grad,
    task_loss,
    topk_prediction,
)
from .marginals import MarginalDist, aggregate_crops, topk_marginals, topk_marginals_batch
from .toytrain import (
    LinearModel,
    NoisySpec,
    TrainingDiverged,
    TrainReport,
    generate_dataset,
    margin_equivalence_check,
    topk_accuracy,
    train,
)

__all__ = [
    "__version__",
    "EspResult",
    "esp_forward_dc",
    "esp_forward_sum",
    "GradTable",
    "default_p_order",
    "esp_backward",
    "grad_approx",
    "instability_policy",
    "LogCoeffs",
    "LogReal",
    "log_sub_exp",
    "log_sum_exp",
    "truncated_poly_mul",
    "GradResult",
    "LossConfig",
    "ScoreBatch",
    "cross_entropy",
    "hard_loss",
    "hard_loss_reformulated",
    "smooth_loss",
    "smooth_loss_batch",
    "smooth_loss_grad",
    "task_loss",
    "topk_prediction",
    "MarginalDist",
    "aggregate_crops",
    "topk_marginals",
    "topk_marginals_batch",
    "LinearModel",
    "NoisySpec",
    "TrainingDiverged",
    "TrainReport",
    "generate_dataset",
    "margin_equivalence_check",
    "topk_accuracy",
    "train",
]
