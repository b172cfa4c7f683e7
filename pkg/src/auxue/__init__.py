"""auxue: auxiliary uncertainty estimation for frozen regression models.

A small float64 autodiff engine (``auxue.diffkit``) underpins two
uncertainty heads trained against a frozen main-task model:

- aleatoric: per-input distribution parameters under a selectable
  residual model (Gaussian, Laplace, generalized Gaussian,
  Normal-Inverse-Gamma) fit by negative log-likelihood;
- epistemic: Dirichlet evidence over K quantile-balanced error classes,
  with uncertainty K/S from the Dirichlet strength S.

``auxue.metrics`` evaluates uncertainty quality (sparsification AUSE /
AURG, ROC-AUC, PR-AUPR, UCE); ``auxue.harness`` orchestrates the
synthetic-1D and tabular OOD experiments behind the ``auxue`` CLI.
"""

from . import datagen, dido, diffkit, distloss, metrics, nnet
from .errors import (
    AuxueError,
    ContractError,
    DivergenceError,
    DomainError,
    PersistenceError,
    ShapeMismatchError,
)

__version__ = "0.1.0"

__all__ = [
    "datagen",
    "dido",
    "diffkit",
    "distloss",
    "metrics",
    "nnet",
    "AuxueError",
    "ContractError",
    "DivergenceError",
    "DomainError",
    "PersistenceError",
    "ShapeMismatchError",
    "__version__",
]
