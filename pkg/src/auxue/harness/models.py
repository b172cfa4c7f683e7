"""Model construction for the experiments: the main-task MLP and the
auxiliary uncertainty estimator with its two heads.

The AuxUE never touches the main model's parameters. Its feature
stream is either the main model's penultimate activations (toy, width
300) or the raw standardized inputs routed through the AuxUE's own
small extractor (tabular, width 16). Two heads share that stream:

- sigma1 (aleatoric): one affine layer with an exponential activation
  emitting the positive distribution parameter(s) of the chosen
  residual model (1 for gaussian/laplace, 2 for ggau, 3 for nig);
- sigma2 (epistemic): cosine-similarity layer -> hidden relu layer ->
  affine layer with exponential activation emitting K non-negative
  evidence values.

The feature stream is standardized per dimension with statistics fit on
the training split before it reaches either head. The cosine layer
compares directions, and raw activation vectors share a large common
offset that drowns out directional contrast; removing it makes
off-distribution feature patterns decorrelate from every training
pattern, which is what drives the evidence (and hence Dirichlet
strength) toward zero away from the data.
"""

from dataclasses import dataclass

import numpy as np

from ..diffkit import tensor as tk
from ..distloss import PARAM_NAMES
from ..errors import ContractError
from ..nnet import MLP, MLPSpec


# Initial log-evidence of the sigma2 output head. exp(-6) ~ 0.0025, so a
# freshly built estimator starts at alpha ~ 1 everywhere: the uniform
# Dirichlet prior. Training then grows evidence only where the data term
# demands it, leaving regions unlike the training features near the prior.
EVIDENCE_INIT_LOG = -6.0


def n_aleatoric_params(dist):
    return len(PARAM_NAMES[dist])


def main_spec(config):
    return MLPSpec(widths=config.main_widths, activations=config.main_activations)


def build_main(config, seed):
    return MLP(main_spec(config), seed=seed)


@dataclass
class AuxUE:
    """Auxiliary estimator: optional extractor plus the two heads.

    ``feature_mean``/``feature_scale`` standardize the incoming stream;
    they default to identity and are fit from the training features at
    the start of AuxUE training.
    """

    dist: str
    k: int
    feature_mode: str
    extractor: MLP | None
    sigma1: MLP
    sigma2: MLP
    feature_mean: np.ndarray
    feature_scale: np.ndarray

    def parameters(self):
        params = []
        if self.extractor is not None:
            params.extend(self.extractor.parameters())
        params.extend(self.sigma1.parameters())
        params.extend(self.sigma2.parameters())
        return params

    def fit_feature_norm(self, feats):
        """Fit the per-dimension standardization on training features."""
        feats = np.asarray(feats, dtype=np.float64)
        self.feature_mean[:] = feats.mean(axis=0)
        self.feature_scale[:] = feats.std(axis=0) + 1e-8

    def features(self, x):
        """Feature stream seen by both heads.

        ``x`` is raw (standardized) input in extractor mode, or the main
        model's penultimate activations in penultimate mode. Either way
        it is frozen data, so the standardization runs on plain arrays.
        """
        arr = x.data if isinstance(x, tk.Tensor) else np.asarray(x, dtype=np.float64)
        h = tk.as_tensor((arr - self.feature_mean) / self.feature_scale)
        return self.extractor.forward(h) if self.extractor is not None else h

    def forward(self, x):
        """Returns (aleatoric parameter columns, evidence tensor [B, K])."""
        h = self.features(x)
        raw = self.sigma1.forward(h)
        params = [tk.take_column(raw, j) for j in range(raw.data.shape[1])]
        evidence = self.sigma2.forward(h)
        return params, evidence


def build_auxue(config, in_dim, seed):
    """Assemble the AuxUE for a feature stream of width ``in_dim``.

    Sub-blocks draw from separate derived seeds so architecture tweaks
    in one block do not reshuffle another block's initialization.
    """
    if config.feature_mode == "extractor":
        extractor = MLP(
            MLPSpec((in_dim, config.extractor_width), (config.extractor_activation,)),
            seed=seed * 4 + 1,
        )
        feat_dim = config.extractor_width
    else:
        extractor = None
        feat_dim = in_dim
    sigma1 = MLP(
        MLPSpec((feat_dim, n_aleatoric_params(config.dist)), ("exp",)),
        seed=seed * 4 + 2,
    )
    sigma2 = MLP(
        MLPSpec(
            (feat_dim, config.cos_width, config.hidden_width, config.k),
            ("cosine", "relu", "exp"),
        ),
        seed=seed * 4 + 3,
    )
    sigma2.layers[-1].weight.data[:] = 0.0
    sigma2.layers[-1].bias.data[:] = EVIDENCE_INIT_LOG
    return AuxUE(
        dist=config.dist,
        k=config.k,
        feature_mode=config.feature_mode,
        extractor=extractor,
        sigma1=sigma1,
        sigma2=sigma2,
        feature_mean=np.zeros(in_dim, dtype=np.float64),
        feature_scale=np.ones(in_dim, dtype=np.float64),
    )


def mlp_state(mlp):
    """JSON-ready description of an MLP: spec plus row-major parameters."""
    layers = []
    for layer, tag in zip(mlp.layers, mlp.spec.activations):
        entry = {"weight": layer.weight.data.tolist()}
        if tag != "cosine":
            entry["bias"] = layer.bias.data.tolist()
        layers.append(entry)
    return {
        "widths": list(mlp.spec.widths),
        "activations": list(mlp.spec.activations),
        "layers": layers,
    }


def mlp_from_state(state):
    """Rebuild an MLP from ``mlp_state`` output, bit-exact parameters."""
    from ..diffkit.tensor import Tensor
    from ..nnet import CosineSimLayer, LinearLayer

    spec = MLPSpec(tuple(state["widths"]), tuple(state["activations"]))
    if len(state["layers"]) != spec.n_layers:
        raise ContractError(
            f"checkpoint has {len(state['layers'])} layers, spec expects {spec.n_layers}"
        )
    layers = []
    for entry, tag, fan_in, fan_out in zip(
        state["layers"], spec.activations, spec.widths, spec.widths[1:]
    ):
        weight = np.asarray(entry["weight"], dtype=np.float64)
        if weight.shape != (fan_out, fan_in):
            raise ContractError(
                f"checkpoint weight shape {weight.shape} != {(fan_out, fan_in)}"
            )
        if tag == "cosine":
            layers.append(CosineSimLayer(Tensor(weight, requires_grad=True)))
        else:
            bias = np.asarray(entry["bias"], dtype=np.float64)
            if bias.shape != (fan_out,):
                raise ContractError(
                    f"checkpoint bias shape {bias.shape} != {(fan_out,)}"
                )
            layers.append(
                LinearLayer(
                    Tensor(weight, requires_grad=True), Tensor(bias, requires_grad=True)
                )
            )
    return MLP(spec, layers=layers)
