"""Aleatoric negative log-likelihood losses and the main-task MSE.

Residual convention: r = y - f(x), with the main model f frozen, so
every loss depends on (y, f(x)) only through r. All losses are batch
means and differentiable through diffkit; parameters may be graph
tensors (training) or plain arrays (direct evaluation).

``gaussian_nll`` takes the VARIANCE, not the standard deviation: the
loss reads (1/2) log sigma + r^2 / (2 sigma), where both occurrences
are the same sigma. Passing a standard deviation would silently halve
the log term's scale, so the contract is stated here once.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .diffkit import tensor as tk
from .errors import ContractError, DomainError

HALF_LOG_PI = 0.5723649429247001  # log sqrt(pi)
NIG_LAMBDA_DEFAULT = 0.01

VARIANTS = ("gaussian", "laplace", "ggau", "nig")
PARAM_NAMES = {
    "gaussian": ("sigma",),
    "laplace": ("b",),
    "ggau": ("alpha", "beta"),
    "nig": ("nu", "alpha", "beta"),
}


def _as_batch(x):
    t = tk.as_tensor(x)
    if t.data.ndim == 0:
        return tk.reshape(t, (1,))
    return t


def _require_positive(op, name, t):
    if np.any(t.data <= 0.0):
        raise DomainError(op, f"{name} must be strictly positive")


def mse_loss(pred, target):
    """Mean squared residual."""
    pred, target = _as_batch(pred), _as_batch(target)
    return tk.mean(tk.power(tk.subtract(pred, target), 2.0))


def gaussian_nll(sigma, residual):
    """Mean of (1/2) log sigma + r^2 / (2 sigma); sigma is the variance."""
    sigma, r = _as_batch(sigma), _as_batch(residual)
    _require_positive("gaussian_nll", "sigma", sigma)
    r2 = tk.power(r, 2.0)
    per = tk.add(tk.multiply(0.5, tk.log(sigma)), tk.divide(r2, tk.multiply(2.0, sigma)))
    return tk.mean(per)


def laplace_nll(b, residual):
    """Mean of log(2b) + |r| / b."""
    b, r = _as_batch(b), _as_batch(residual)
    _require_positive("laplace_nll", "b", b)
    per = tk.add(tk.log(tk.multiply(2.0, b)), tk.divide(tk.absolute(r), b))
    return tk.mean(per)


def ggau_nll(alpha, beta, residual):
    """Generalized Gaussian NLL: mean of (|r|/alpha)^beta - log(beta/alpha) + lgamma(1/beta)."""
    alpha, beta, r = _as_batch(alpha), _as_batch(beta), _as_batch(residual)
    _require_positive("ggau_nll", "alpha", alpha)
    _require_positive("ggau_nll", "beta", beta)
    powered = tk.power(tk.divide(tk.absolute(r), alpha), beta)
    per = tk.add(
        tk.add(powered, tk.subtract(tk.log(alpha), tk.log(beta))),
        tk.lgamma(tk.divide(1.0, beta)),
    )
    return tk.mean(per)


def nig_nll(nu, alpha, beta, residual, lam_nig=NIG_LAMBDA_DEFAULT):
    """Normal-Inverse-Gamma evidential NLL with evidence regularizer.

    L1 = (1/2) log(pi/nu) - alpha log Omega
         + (alpha + 1/2) log(r^2 nu + Omega) + lgamma(alpha) - lgamma(alpha + 1/2)
    L2 = |r| (2 nu + alpha),  Omega = 2 beta (1 + nu); returns mean L1 + lam_nig * mean L2.

    Only positivity is enforced; alpha <= 1/2 triggers a warning (the
    implied Student-t moment does not exist there) rather than an error.
    """
    nu, alpha, beta = _as_batch(nu), _as_batch(alpha), _as_batch(beta)
    r = _as_batch(residual)
    _require_positive("nig_nll", "nu", nu)
    _require_positive("nig_nll", "alpha", alpha)
    _require_positive("nig_nll", "beta", beta)
    if lam_nig < 0:
        raise ContractError(f"nig_nll: lam_nig {lam_nig} must be >= 0")
    if np.any(alpha.data <= 0.5):
        warnings.warn("nig_nll: alpha <= 0.5 encountered; fit may be degenerate")
    omega = tk.multiply(tk.multiply(2.0, beta), tk.add(1.0, nu))
    r2nu = tk.multiply(tk.power(r, 2.0), nu)
    l1 = tk.add(
        tk.subtract(
            tk.multiply(0.5, tk.subtract(np.log(np.pi), tk.log(nu))),
            tk.multiply(alpha, tk.log(omega)),
        ),
        tk.add(
            tk.multiply(tk.add(alpha, 0.5), tk.log(tk.add(r2nu, omega))),
            tk.subtract(tk.lgamma(alpha), tk.lgamma(tk.add(alpha, 0.5))),
        ),
    )
    l2 = tk.multiply(tk.absolute(r), tk.add(tk.multiply(2.0, nu), alpha))
    return tk.add(tk.mean(l1), tk.multiply(float(lam_nig), tk.mean(l2)))


@dataclass
class AleatoricParams:
    """Per-sample distribution parameters emitted by an aleatoric head."""

    variant: str
    values: tuple  # one array per parameter, order per PARAM_NAMES

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"AleatoricParams: unknown variant {self.variant!r}")
        expected = len(PARAM_NAMES[self.variant])
        if len(self.values) != expected:
            raise ContractError(
                f"AleatoricParams: {self.variant} needs {expected} parameter arrays, "
                f"got {len(self.values)}"
            )
        self.values = tuple(np.asarray(v, dtype=np.float64) for v in self.values)

    def uncertainty(self):
        """Scalar per-sample uncertainty score for ranking/calibration.

        gaussian -> sigma (variance); laplace -> b; ggau -> alpha (scale);
        nig -> beta / (nu (alpha - 1)), the evidential epistemic-variance
        form, guarded at alpha <= 1 by clamping the denominator.
        """
        if self.variant == "gaussian":
            return self.values[0]
        if self.variant == "laplace":
            return self.values[0]
        if self.variant == "ggau":
            return self.values[0]
        nu, alpha, beta = self.values
        return beta / (nu * np.maximum(alpha - 1.0, 1e-6))


def nll_loss(variant, params, residual):
    """Dispatch the variant's NLL over a list of parameter tensors."""
    if variant == "gaussian":
        return gaussian_nll(params[0], residual)
    if variant == "laplace":
        return laplace_nll(params[0], residual)
    if variant == "ggau":
        return ggau_nll(params[0], params[1], residual)
    if variant == "nig":
        return nig_nll(params[0], params[1], params[2], residual)
    raise ContractError(f"nll_loss: unknown variant {variant!r}")
