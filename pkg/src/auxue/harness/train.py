"""Training loops: main-task regression, the AuxUE (joint aleatoric +
evidential objective), and the deep-ensembles baseline.

The main model is trained to convergence first and then frozen: AuxUE
training reads its predictions and penultimate features as plain
arrays, so no gradient can reach the main parameters by construction.
All loops are deterministic per seed (a single generator drives the
batch shuffles; initialization seeds are derived in the builders).
"""

from dataclasses import dataclass

import numpy as np

from ..dido import (
    combined_auxue_loss,
    dido_loss,
    discretization_targets,
    evidence_to_alpha,
    epistemic_uncertainty,
    fit_discretization,
)
from ..diffkit import backward, tensor as tk
from ..distloss import AleatoricParams, mse_loss, nll_loss
from ..errors import DivergenceError
from ..nnet import Adam, NonFiniteGradientError, minibatch_indices
from .models import build_auxue, build_main


@dataclass
class TrainLog:
    stage: str
    epochs: int
    final_train_loss: float
    final_val_loss: float | None = None


def predict(mlp, x):
    """Point predictions as a plain vector; no gradient bookkeeping kept."""
    out = mlp.forward(tk.as_tensor(np.asarray(x, dtype=np.float64)))
    return out.data[:, 0].copy()


def penultimate_features(mlp, x):
    """Main-model penultimate activations as a plain array (frozen stream)."""
    _, feats = mlp.forward_with_features(tk.as_tensor(np.asarray(x, dtype=np.float64)))
    return feats.data.copy()


def _check_finite(loss_value, stage, epoch, batch_index):
    if not np.isfinite(loss_value):
        raise DivergenceError(
            stage, epoch, batch_index, f"non-finite loss {loss_value}"
        )


def train_main(config, x_train, y_train, x_val=None, y_val=None, seed=0):
    """Train the main-task MLP on mean squared error."""
    stage = "train-main"
    mlp = build_main(config, seed)
    opt = Adam(mlp.parameters(), lr=config.main_lr)
    rng = np.random.default_rng(seed)
    n = x_train.shape[0]
    last = float("nan")
    for epoch in range(config.main_epochs):
        for b, idx in enumerate(minibatch_indices(n, config.main_batch, rng)):
            xb = tk.as_tensor(x_train[idx])
            yb = tk.as_tensor(y_train[idx])
            loss = mse_loss(tk.take_column(mlp.forward(xb), 0), yb)
            last = loss.item()
            _check_finite(last, stage, epoch, b)
            backward(loss)
            try:
                opt.step()
            except NonFiniteGradientError as exc:
                raise DivergenceError(stage, epoch, b, str(exc)) from exc
            opt.zero_grad()
    train_mse = float(np.mean((y_train - predict(mlp, x_train)) ** 2))
    val_mse = None
    if x_val is not None and len(x_val):
        val_mse = float(np.mean((y_val - predict(mlp, x_val)) ** 2))
    return mlp, TrainLog(stage, config.main_epochs, train_mse, val_mse)


def train_ensemble(config, x_train, y_train, x_val=None, y_val=None,
                   seed=0, member_seeds=None):
    """Train ``ensemble_size`` main-task models on distinct derived seeds."""
    if member_seeds is None:
        member_seeds = [seed + 1001 * (i + 1) for i in range(config.ensemble_size)]
    members = []
    for member_seed in member_seeds:
        mlp, _ = train_main(config, x_train, y_train, x_val, y_val, seed=member_seed)
        members.append(mlp)
    return members


def ensemble_scores(members, x):
    """Epistemic score of the ensemble: variance of member point estimates."""
    preds = np.stack([predict(m, x) for m in members], axis=0)
    return preds.var(axis=0)


def ensemble_mean(members, x):
    preds = np.stack([predict(m, x) for m in members], axis=0)
    return preds.mean(axis=0)


def _auxue_batch_loss(auxue, feats, residual, targets, lam):
    params, evidence = auxue.forward(tk.as_tensor(feats))
    nll = nll_loss(auxue.dist, params, tk.as_tensor(residual))
    evid = dido_loss(evidence, targets, lam)
    return combined_auxue_loss(nll, evid)


def train_auxue(config, main_mlp, x_train, y_train, x_val=None, y_val=None, seed=0):
    """Train both AuxUE heads against the frozen main model's errors.

    The discretization is fit once on the training-split absolute errors
    and stays frozen. Returns (auxue, discretization, log).
    """
    stage = "train-auxue"
    residual_train = y_train - predict(main_mlp, x_train)
    disc = fit_discretization(np.abs(residual_train), config.k)
    targets_train = discretization_targets(disc, np.abs(residual_train))

    if config.feature_mode == "penultimate":
        feats_train = penultimate_features(main_mlp, x_train)
    else:
        feats_train = np.asarray(x_train, dtype=np.float64)
    auxue = build_auxue(config, feats_train.shape[1], seed)
    auxue.fit_feature_norm(feats_train)

    opt = Adam(auxue.parameters(), lr=config.auxue_lr)
    rng = np.random.default_rng(seed + 7919)
    n = feats_train.shape[0]
    last = float("nan")
    for epoch in range(config.auxue_epochs):
        for b, idx in enumerate(minibatch_indices(n, config.auxue_batch, rng)):
            loss = _auxue_batch_loss(
                auxue, feats_train[idx], residual_train[idx], targets_train[idx],
                config.lam,
            )
            last = loss.item()
            _check_finite(last, stage, epoch, b)
            backward(loss)
            try:
                opt.step()
            except NonFiniteGradientError as exc:
                raise DivergenceError(stage, epoch, b, str(exc)) from exc
            opt.zero_grad()

    val_loss = None
    if x_val is not None and len(x_val):
        residual_val = y_val - predict(main_mlp, x_val)
        if config.feature_mode == "penultimate":
            feats_val = penultimate_features(main_mlp, x_val)
        else:
            feats_val = np.asarray(x_val, dtype=np.float64)
        targets_val = discretization_targets(disc, np.abs(residual_val))
        val_loss = _auxue_batch_loss(
            auxue, feats_val, residual_val, targets_val, config.lam
        ).item()
    return auxue, disc, TrainLog(stage, config.auxue_epochs, last, val_loss)


def auxue_scores(auxue, feats):
    """Evaluate both heads on a frozen feature block.

    Returns a dict of plain arrays: per-sample aleatoric uncertainty,
    epistemic uncertainty K/S, Dirichlet strength, and the raw
    aleatoric parameter columns.
    """
    params, evidence = auxue.forward(tk.as_tensor(np.asarray(feats, dtype=np.float64)))
    values = tuple(p.data.copy() for p in params)
    aleatoric = AleatoricParams(auxue.dist, values).uncertainty()
    dirichlet = evidence_to_alpha(evidence.data)
    return {
        "aleatoric": aleatoric,
        "epistemic": epistemic_uncertainty(dirichlet),
        "strength": dirichlet.strength,
        "params": values,
    }


def main_features_for(auxue_mode, main_mlp, x):
    """Feature block the AuxUE heads expect for raw (standardized) inputs x."""
    if auxue_mode == "penultimate":
        return penultimate_features(main_mlp, x)
    return np.asarray(x, dtype=np.float64)
