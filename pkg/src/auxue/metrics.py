"""Uncertainty-evaluation metrics: sparsification curves with AUSE and
AURG, ranking metrics (ROC-AUC, PR-AUPR) for OOD detection, and the
uncertainty calibration error (UCE).

Conventions (fixed so every oracle test is deterministic):
- ties break by input index everywhere (stable sorts);
- the random sparsification baseline is the constant full-set error,
  i.e. the expectation of removal in random order;
- curves stop at the last removal fraction below 1 (cannot remove all);
- areas integrate raw (unnormalized) error values by the trapezoid rule.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

ERROR_METRICS = ("rmse", "rel")


class MetricInputError(ContractError):
    """Metric inputs fail a precondition (shape, class presence, range)."""


def _as_vector(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise MetricInputError(f"{name} must be a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise MetricInputError(f"{name} contains non-finite values")
    return x


@dataclass(frozen=True)
class SparsificationResult:
    """Retained-set error at each removal fraction for the three orderings."""

    fractions: np.ndarray
    predictive: np.ndarray
    oracle: np.ndarray
    random: np.ndarray
    error_metric: str
    n_excluded_zero_targets: int = 0


def _retained_metric(contributions, error_metric):
    m = float(np.mean(contributions))
    return float(np.sqrt(m)) if error_metric == "rmse" else m


def sparsification_curves(residuals, scores, targets=None, step=0.05,
                          error_metric="rmse"):
    """Error on the retained set after removing the ⌈tN⌉ most-uncertain items.

    The predictive curve removes by descending ``scores``, the oracle by
    descending per-datum error contribution, and the random baseline is
    the constant full-set error. ``error_metric`` is "rmse"
    (sqrt of mean squared residual) or "rel" (mean |residual| / |target|,
    which requires ``targets``; zero targets are excluded with a warning
    and counted in the result).
    """
    residuals = _as_vector(residuals, "residuals")
    scores = _as_vector(scores, "scores")
    if residuals.size != scores.size:
        raise MetricInputError(
            f"length mismatch: {residuals.size} residuals vs {scores.size} scores"
        )
    if error_metric not in ERROR_METRICS:
        raise MetricInputError(f"unknown error_metric {error_metric!r}")
    if not 0.0 < step < 1.0:
        raise MetricInputError(f"step must lie in (0, 1), got {step}")

    n_excluded = 0
    if error_metric == "rel":
        if targets is None:
            raise MetricInputError("error_metric 'rel' requires targets")
        targets = _as_vector(targets, "targets")
        if targets.size != residuals.size:
            raise MetricInputError(
                f"length mismatch: {residuals.size} residuals vs {targets.size} targets"
            )
        keep = targets != 0.0
        n_excluded = int(np.count_nonzero(~keep))
        if n_excluded:
            warnings.warn(
                f"excluding {n_excluded} zero-target items from relative error",
                stacklevel=2,
            )
            residuals, scores, targets = residuals[keep], scores[keep], targets[keep]
        contributions = np.abs(residuals) / np.abs(targets)
    else:
        contributions = residuals**2

    n = residuals.size
    if n < 20:
        raise MetricInputError(f"need at least 20 items for a curve, got {n}")

    n_steps = int(round(1.0 / step))
    fractions = np.arange(n_steps) * step
    # stable descending order: ties resolve by input index
    by_score = np.argsort(-scores, kind="stable")
    by_error = np.argsort(-contributions, kind="stable")
    full = _retained_metric(contributions, error_metric)

    predictive = np.empty(n_steps)
    oracle = np.empty(n_steps)
    for i, t in enumerate(fractions):
        drop = int(np.ceil(t * n))
        predictive[i] = _retained_metric(contributions[by_score[drop:]], error_metric)
        oracle[i] = _retained_metric(contributions[by_error[drop:]], error_metric)
    return SparsificationResult(
        fractions=fractions,
        predictive=predictive,
        oracle=oracle,
        random=np.full(n_steps, full),
        error_metric=error_metric,
        n_excluded_zero_targets=n_excluded,
    )


def ause_aurg(curves):
    """Trapezoidal areas: AUSE = ∫(predictive − oracle), AURG = ∫(random − predictive)."""
    if not (len(curves.fractions) == len(curves.predictive)
            == len(curves.oracle) == len(curves.random)):
        raise ContractError("ause_aurg: curves must share one fraction grid")
    ause = float(np.trapezoid(curves.predictive - curves.oracle, curves.fractions))
    aurg = float(np.trapezoid(curves.random - curves.predictive, curves.fractions))
    return ause, aurg


def _validate_binary_labels(labels, scores):
    labels = np.asarray(labels)
    scores = _as_vector(scores, "scores")
    if labels.shape != scores.shape:
        raise MetricInputError(
            f"length mismatch: {scores.size} scores vs {labels.size} labels"
        )
    labels = labels.astype(np.int64)
    if not np.all((labels == 0) | (labels == 1)):
        raise MetricInputError("labels must be binary 0/1")
    return labels, scores


def _midranks(values):
    """Ranks starting at 1 with ties assigned their group's average rank."""
    n = values.size
    order = np.argsort(values, kind="stable")
    s = values[order]
    new_group = np.r_[True, s[1:] != s[:-1]]
    boundaries = np.flatnonzero(np.r_[new_group, True])
    group_mid = (boundaries[:-1] + boundaries[1:] - 1) / 2.0 + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = group_mid[np.cumsum(new_group) - 1]
    return ranks


def roc_auc(scores, labels):
    """Mann–Whitney AUC with the midrank tie convention."""
    labels, scores = _validate_binary_labels(labels, scores)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricInputError("roc_auc requires both classes present")
    ranks = _midranks(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_aupr(scores, labels):
    """Area under the precision–recall curve with step interpolation.

    Thresholds sweep the distinct score values in descending order (tied
    scores enter as one group); the area sums precision at each recall
    level times the recall increment.
    """
    labels, scores = _validate_binary_labels(labels, scores)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise MetricInputError("pr_aupr requires at least one positive label")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # indices closing each tie group (last occurrence of each distinct score)
    group_end = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tps = np.cumsum(y)[group_end].astype(np.float64)
    fps = np.cumsum(1 - y)[group_end].astype(np.float64)
    precision = tps / (tps + fps)
    recall = tps / n_pos
    recall_prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - recall_prev) * precision))


def uce(errors, uncertainties, n_bins=15):
    """Uncertainty calibration error over equal-width uncertainty bins.

    Bins cover [min, max] of the uncertainties; each occupied bin
    contributes (count/N) · |mean error − mean uncertainty|.
    """
    errors = _as_vector(errors, "errors")
    uncertainties = _as_vector(uncertainties, "uncertainties")
    if errors.size != uncertainties.size:
        raise MetricInputError(
            f"length mismatch: {errors.size} errors vs {uncertainties.size} uncertainties"
        )
    if n_bins < 2:
        raise MetricInputError(f"n_bins must be >= 2, got {n_bins}")
    lo, hi = float(uncertainties.min()), float(uncertainties.max())
    if hi == lo:
        bin_idx = np.zeros(uncertainties.size, dtype=np.int64)
    else:
        scaled = (uncertainties - lo) / (hi - lo) * n_bins
        bin_idx = np.clip(scaled.astype(np.int64), 0, n_bins - 1)
    n = errors.size
    total = 0.0
    for b in range(n_bins):
        mask = bin_idx == b
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        gap = abs(float(errors[mask].mean()) - float(uncertainties[mask].mean()))
        total += (count / n) * gap
    return float(total)


@dataclass
class MetricsReport:
    """Bundle of evaluation metrics plus run metadata for serialization."""

    seed: int
    config_hash: str = ""
    ause_rel: float | None = None
    ause_rmse: float | None = None
    aurg_rel: float | None = None
    aurg_rmse: float | None = None
    auc: float | None = None
    aupr: float | None = None
    uce: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("ause_rel", "ause_rmse", "aurg_rel", "aurg_rmse",
                     "auc", "aupr", "uce"):
            value = getattr(self, name)
            if value is None:
                continue
            if not np.isfinite(value):
                raise ContractError(f"MetricsReport.{name} is not finite: {value}")
            if name in ("auc", "aupr") and not 0.0 <= value <= 1.0:
                raise ContractError(f"MetricsReport.{name} outside [0, 1]: {value}")

    def to_dict(self):
        out = {"seed": self.seed, "config_hash": self.config_hash}
        for name in ("ause_rel", "ause_rmse", "aurg_rel", "aurg_rmse",
                     "auc", "aupr", "uce"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        out.update(self.extra)
        return out
