"""Discretization-induced Dirichlet posterior: error binning, the
evidential loss, and the strength-based epistemic uncertainty measure.

Pipeline: per-datum main-task errors are split into K balanced classes
by empirical quantiles; the epistemic head outputs non-negative
evidence e per class; concentration alpha = e + 1 defines a Dirichlet
posterior over the K classes whose strength S = sum(alpha) yields the
epistemic uncertainty K/S in (0, 1].

Discretization boundary convention (bit-for-bit reproducible): class 0
is the closed interval [t0, t1]; every later class j is the left-open
(tj, tj+1]. With all-equal errors every datum lands in class 0.
Quantiles use linear interpolation between order statistics.
"""

from dataclasses import dataclass

import numpy as np

from .diffkit import special
from .diffkit import tensor as tk
from .errors import ContractError, DomainError


class DiscretizationError(ContractError):
    """Not enough (valid) error values for the requested class count."""


@dataclass(frozen=True)
class DiscretizationSpec:
    """K and the K+1 ascending quantile thresholds fit on training errors."""

    k: int
    thresholds: tuple

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if self.k < 2:
            raise DiscretizationError(f"K must be >= 2, got {self.k}")
        if len(self.thresholds) != self.k + 1:
            raise ContractError(
                f"need {self.k + 1} thresholds for K={self.k}, got {len(self.thresholds)}"
            )
        if any(b < a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ContractError(f"thresholds must be non-decreasing: {self.thresholds}")


def _validate_errors(errors, k, op):
    errors = np.asarray(errors, dtype=np.float64)
    if errors.ndim != 1 or errors.size == 0:
        raise DiscretizationError(f"{op}: errors must be a non-empty vector")
    if not np.all(np.isfinite(errors)):
        raise DiscretizationError(f"{op}: errors contain non-finite values")
    if k < 2:
        raise DiscretizationError(f"{op}: K must be >= 2, got {k}")
    if errors.size < k:
        raise DiscretizationError(
            f"{op}: need at least K={k} error values, got {errors.size}"
        )
    return errors


def fit_discretization(errors, k):
    """Quantile thresholds at levels j/K over the given error values."""
    errors = _validate_errors(errors, k, "fit_discretization")
    levels = np.arange(k + 1) / k
    thresholds = np.quantile(errors, levels)
    return DiscretizationSpec(k=int(k), thresholds=tuple(thresholds))


def assign_classes(spec, errors):
    """Class index per error under the fitted thresholds.

    Values at or below t1 map to class 0 (closed first bin); each later
    class j holds (tj, tj+1]. Out-of-range values clamp to the end bins,
    which cannot occur when assigning the fitting errors themselves.
    """
    errors = np.asarray(errors, dtype=np.float64)
    classes = np.zeros(errors.shape, dtype=np.int64)
    for j in range(1, spec.k):
        classes[errors > spec.thresholds[j]] = j
    return classes


def one_hot(classes, k):
    classes = np.asarray(classes, dtype=np.int64)
    if classes.size and (classes.min() < 0 or classes.max() >= k):
        raise ContractError(f"one_hot: class index outside [0, {k})")
    out = np.zeros((classes.size, k), dtype=np.float64)
    out[np.arange(classes.size), classes] = 1.0
    return out


def discretization_targets(spec, errors):
    """One-hot matrix [N, K] of class targets for the given errors."""
    return one_hot(assign_classes(spec, errors), spec.k)


def discretize_per_sample(error_map, k, valid_mask=None):
    """One-hot targets with quantiles fit within the single sample.

    ``valid_mask`` excludes elements (their rows come back all-zero);
    at least K valid elements are required.
    """
    error_map = np.asarray(error_map, dtype=np.float64)
    if error_map.ndim != 1:
        raise ContractError("discretize_per_sample: error_map must be a vector")
    if valid_mask is None:
        valid_mask = np.ones(error_map.shape, dtype=bool)
    else:
        valid_mask = np.asarray(valid_mask, dtype=bool)
        if valid_mask.shape != error_map.shape:
            raise ContractError("discretize_per_sample: mask shape mismatch")
    valid = error_map[valid_mask]
    _validate_errors(valid, k, "discretize_per_sample")
    spec = fit_discretization(valid, k)
    out = np.zeros((error_map.size, k), dtype=np.float64)
    out[valid_mask] = one_hot(assign_classes(spec, valid), k)
    return out


@dataclass(frozen=True)
class DirichletOutput:
    """Evidence vector(s) with derived concentration and strength.

    ``evidence`` is one vector of length K or a batch [N, K]; the
    derived fields follow the last axis.
    """

    evidence: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.evidence, dtype=np.float64)
        if ev.ndim not in (1, 2) or ev.shape[-1] < 2:
            raise ContractError(f"DirichletOutput: bad evidence shape {ev.shape}")
        if np.any(ev < 0.0):
            raise ContractError("DirichletOutput: evidence must be non-negative")
        object.__setattr__(self, "evidence", ev)

    @property
    def k(self):
        return self.evidence.shape[-1]

    @property
    def alpha(self):
        return self.evidence + 1.0

    @property
    def strength(self):
        return self.alpha.sum(axis=-1)

    @property
    def expected_pi(self):
        """Posterior-mean categorical parameter alpha / S (diagnostic)."""
        return self.alpha / np.expand_dims(self.strength, -1)


def evidence_to_alpha(evidence):
    """Wrap raw evidence as a DirichletOutput (alpha = e + 1, S = sum alpha)."""
    return DirichletOutput(np.asarray(evidence, dtype=np.float64))


def epistemic_uncertainty(d):
    """Inverse-strength uncertainty K/S in (0, 1]; 1 iff zero total evidence."""
    return d.k / d.strength


def aleatoric_from_dirichlet(evidence):
    """Most-supported error class: argmax alpha, ties to the lowest index."""
    ev = np.asarray(evidence, dtype=np.float64)
    return int(np.argmax(ev)) if ev.ndim == 1 else np.argmax(ev, axis=-1)


def kl_dirichlet_to_uniform(alpha):
    """KL(Dir(alpha) || Dir(1)) in closed form.

    lgamma(S) - sum lgamma(alpha_k) - lgamma(K)
    + sum (alpha_k - 1) (psi(alpha_k) - psi(S)).
    1-D alpha gives a float; a 2-D batch gives one value per row.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0.0):
        raise DomainError("kl_dirichlet_to_uniform", "alpha must be positive")
    batched = alpha.ndim == 2
    a = alpha if batched else alpha[None, :]
    k = a.shape[1]
    s = a.sum(axis=1)
    kl = (
        special.lgamma(s)
        - special.lgamma(a).sum(axis=1)
        - special.lgamma(float(k))
        + ((a - 1.0) * special.digamma(a)).sum(axis=1)
        - (s - k) * special.digamma(s)
    )
    return kl if batched else float(kl[0])


def dirichlet_log_pdf(pi, alpha):
    """Log density of Dir(alpha) at a point on the open simplex."""
    pi = np.asarray(pi, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if pi.shape != alpha.shape or pi.ndim != 1:
        raise ContractError(f"dirichlet_log_pdf: shapes {pi.shape} vs {alpha.shape}")
    if np.any(alpha <= 0.0):
        raise DomainError("dirichlet_log_pdf", "alpha must be positive")
    if np.any(pi <= 0.0) or abs(pi.sum() - 1.0) > 1e-9:
        raise DomainError("dirichlet_log_pdf", "pi must lie on the open simplex")
    s = alpha.sum()
    return float(
        special.lgamma(s)
        - special.lgamma(alpha).sum()
        + ((alpha - 1.0) * np.log(pi)).sum()
    )


def _as_evidence_matrix(evidence):
    e = tk.as_tensor(evidence)
    if e.data.ndim == 1:
        e = tk.reshape(e, (1, e.data.shape[0]))
    if e.data.ndim != 2:
        raise ContractError(f"dido_loss: evidence must be [N, K], got {e.data.shape}")
    if np.any(e.data < 0.0):
        raise ContractError("dido_loss: evidence must be non-negative")
    return e


def dido_loss(evidence, target, lam):
    """Evidential Dirichlet loss with uniform-prior KL regularizer.

    Per sample: sum_k target_k (psi(S) - psi(alpha_k)) + lam * KL(Dir(alpha)||Dir(1)),
    averaged over the batch. Differentiable in the evidence; ``target``
    is a constant one-hot matrix.
    """
    e = _as_evidence_matrix(evidence)
    n, k = e.data.shape
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 1:
        target = target[None, :]
    if target.shape != (n, k):
        raise ContractError(f"dido_loss: target shape {target.shape} != {(n, k)}")
    rowsums = target.sum(axis=1)
    if np.any(target < 0.0) or np.any(np.abs(rowsums - 1.0) > 1e-12):
        raise ContractError("dido_loss: target rows must be one-hot")
    if lam < 0:
        raise ContractError(f"dido_loss: lam {lam} must be >= 0")

    alpha = tk.add(e, 1.0)
    psi_alpha = tk.digamma(alpha)
    strength = tk.rowsum(alpha)
    psi_strength = tk.digamma(strength)
    # sum_k target_k psi(alpha_k) with constant one-hot weights
    data_term = tk.subtract(psi_strength, tk.rowsum(tk.multiply(tk.as_tensor(target), psi_alpha)))
    # KL(Dir(alpha)||Dir(1)): note alpha - 1 = e and S - K = sum(e)
    total_evidence = tk.rowsum(e)
    kl = tk.add(
        tk.subtract(
            tk.subtract(tk.lgamma(strength), tk.rowsum(tk.lgamma(alpha))),
            float(special.lgamma(float(k))),
        ),
        tk.subtract(
            tk.rowsum(tk.multiply(e, psi_alpha)),
            tk.multiply(total_evidence, psi_strength),
        ),
    )
    return tk.mean(tk.add(data_term, tk.multiply(float(lam), kl)))


def combined_auxue_loss(aleatoric_loss, dido_loss_value):
    """Total AuxUE objective: aleatoric NLL plus evidential loss."""
    return tk.add(tk.as_tensor(aleatoric_loss), tk.as_tensor(dido_loss_value))
