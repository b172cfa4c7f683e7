"""MLP construction, the cosine-similarity layer, initialization, Adam.

A network is described by :class:`MLPSpec`: layer widths plus one
activation tag per layer. The tag ``cosine`` marks the layer itself as
a cosine-similarity layer (no bias, output bounded in [-1, 1]); the
other tags (``relu``, ``exp``, ``softplus``, ``tanh``, ``identity``)
are applied on top of an affine layer.
"""

from dataclasses import dataclass

import numpy as np

from .diffkit import tensor as tk
from .diffkit.tensor import Tensor, make_node
from .errors import AuxueError, ContractError, ShapeMismatchError

ACTIVATION_TAGS = ("relu", "exp", "softplus", "tanh", "cosine", "identity")
COSINE_EPS = 1e-8

# Exponential-activation layers clamp their pre-activation to this bound.
# exp(80) ~ 5.5e34: unreachable for anything the heads train toward, but
# finite, so off-distribution extrapolation cannot overflow to inf.
EXP_CLAMP = 80.0


class NonFiniteGradientError(AuxueError):
    """A parameter gradient contained NaN or inf at step time."""

    def __init__(self, param_index):
        self.param_index = param_index
        super().__init__(f"adam_step: non-finite gradient for parameter {param_index}")


@dataclass(frozen=True)
class MLPSpec:
    """Layer widths [d_in, h1, ..., d_out] and one activation tag per layer."""

    widths: tuple
    activations: tuple

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.widths) < 2:
            raise ContractError("MLPSpec: need at least one layer")
        if len(self.activations) != len(self.widths) - 1:
            raise ContractError(
                f"MLPSpec: {len(self.widths) - 1} layers but "
                f"{len(self.activations)} activation tags"
            )
        if any(w <= 0 for w in self.widths):
            raise ContractError(f"MLPSpec: zero-width layer in {self.widths}")
        for tag in self.activations:
            if tag not in ACTIVATION_TAGS:
                raise ContractError(f"MLPSpec: unknown activation {tag!r}")

    @property
    def n_layers(self):
        return len(self.activations)

    def param_count(self):
        total = 0
        for i, tag in enumerate(self.activations):
            fan_in, fan_out = self.widths[i], self.widths[i + 1]
            total += fan_in * fan_out + (0 if tag == "cosine" else fan_out)
        return total


@dataclass
class LinearLayer:
    weight: Tensor  # [out, in]
    bias: Tensor  # [out]


@dataclass
class CosineSimLayer:
    weight: Tensor  # [out, in], no bias


def init_mlp(spec, seed):
    """Initialize layers: He-uniform for relu layers, Xavier-uniform otherwise.

    Weights are drawn uniformly within the bound (sqrt(6/fan_in) for He,
    sqrt(6/(fan_in+fan_out)) for Xavier); biases start at zero.
    Deterministic: one generator seeded once, layers drawn in order.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for i, tag in enumerate(spec.activations):
        fan_in, fan_out = spec.widths[i], spec.widths[i + 1]
        if tag == "relu":
            bound = np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        if tag == "cosine":
            layers.append(CosineSimLayer(Tensor(weight, requires_grad=True)))
        else:
            layers.append(
                LinearLayer(
                    Tensor(weight, requires_grad=True),
                    Tensor(np.zeros(fan_out), requires_grad=True),
                )
            )
    return layers


def cosine_forward(layer, x, eps=COSINE_EPS):
    """Cosine-similarity layer: out_bj = (w_j . x_b) / (max(|w_j|, eps) * max(|x_b|, eps)).

    Scale-invariant in x by construction; a zero input row yields a zero
    output row instead of NaN. Implemented as a single graph primitive
    with a hand-derived vjp (the per-row norms would otherwise need
    broadcasting the engine deliberately does not provide).
    """
    x = tk.as_tensor(x)
    w = layer.weight
    if x.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeMismatchError("cosine_forward", x.data.shape, w.data.shape)
    xd, wd = x.data, w.data
    sim = xd @ wd.T
    nx = np.linalg.norm(xd, axis=1)
    nw = np.linalg.norm(wd, axis=1)
    u = np.maximum(nx, eps)
    v = np.maximum(nw, eps)
    denom = u[:, None] * v[None, :]
    out = sim / denom

    def vjp(g):
        gn = g / denom
        # adjoint through the clamped norms; zero below the eps guard
        xmask = nx > eps
        wmask = nw > eps
        rowdot = (g * out).sum(axis=1) * xmask / np.where(xmask, nx * u, 1.0)
        coldot = (g * out).sum(axis=0) * wmask / np.where(wmask, nw * v, 1.0)
        dx = gn @ wd - rowdot[:, None] * xd
        dw = gn.T @ xd - coldot[:, None] * wd
        return dx, dw

    return make_node("cosine_forward", out, (x, w), vjp)


def _apply_activation(tag, t):
    if tag == "relu":
        return tk.relu(t)
    if tag == "exp":
        return tk.exp(tk.clip(t, -EXP_CLAMP, EXP_CLAMP))
    if tag == "softplus":
        return tk.softplus(t)
    if tag == "tanh":
        return tk.tanh(t)
    return t  # identity


def forward_layers(layers, spec, x):
    """Run x through all layers; returns (output, per-layer activations)."""
    h = tk.as_tensor(x)
    if h.data.ndim != 2 or h.data.shape[1] != spec.widths[0]:
        raise ShapeMismatchError("forward", h.data.shape, (None, spec.widths[0]))
    activations = []
    for layer, tag in zip(layers, spec.activations):
        if tag == "cosine":
            h = cosine_forward(layer, h)
        else:
            pre = tk.add_bias(tk.matmul(h, tk.transpose(layer.weight)), layer.bias)
            h = _apply_activation(tag, pre)
        activations.append(h)
    return h, activations


class MLP:
    """An MLPSpec bound to initialized parameters."""

    def __init__(self, spec, seed=0, layers=None):
        self.spec = spec
        self.layers = init_mlp(spec, seed) if layers is None else layers

    def parameters(self):
        params = []
        for layer in self.layers:
            params.append(layer.weight)
            if isinstance(layer, LinearLayer):
                params.append(layer.bias)
        return params

    def forward(self, x):
        out, _ = forward_layers(self.layers, self.spec, x)
        return out

    def forward_with_features(self, x):
        """Returns (output, penultimate-layer activations)."""
        out, acts = forward_layers(self.layers, self.spec, x)
        if len(acts) < 2:
            raise ContractError("forward_with_features: network has a single layer")
        return out, acts[-2]


class Adam:
    """Bias-corrected Adam over a fixed parameter list.

    Reads each parameter's ``.grad`` (set by ``diffkit.backward``);
    parameters whose grad is None are skipped for that step.
    """

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        # validate every gradient before mutating anything
        for i, p in enumerate(self.params):
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise NonFiniteGradientError(i)
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def minibatch_indices(n, batch_size, rng):
    """Seeded-shuffle minibatch index lists; the last partial batch is kept."""
    if batch_size <= 0:
        raise ContractError(f"minibatch_indices: batch_size {batch_size} must be positive")
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]
