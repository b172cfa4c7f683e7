"""Network building blocks: spec validation, deterministic
initialization with the documented bounds, the cosine-similarity layer,
activation behavior (including the exponential clamp), Adam against a
two-step hand computation, and minibatch scheduling.
"""

import numpy as np
import pytest

from auxue.diffkit import tensor as tk
from auxue.diffkit.tensor import Tensor, backward, grad_check
from auxue.errors import ContractError, ShapeMismatchError
from auxue.nnet import (
    EXP_CLAMP,
    MLP,
    Adam,
    CosineSimLayer,
    MLPSpec,
    NonFiniteGradientError,
    cosine_forward,
    minibatch_indices,
)

# ------------------------------------------------------------------ spec


def test_spec_validation():
    with pytest.raises(ContractError):
        MLPSpec((4,), ())  # no layers
    with pytest.raises(ContractError):
        MLPSpec((4, 3), ("relu", "relu"))  # tag count mismatch
    with pytest.raises(ContractError):
        MLPSpec((4, 0, 1), ("relu", "identity"))  # zero width
    with pytest.raises(ContractError):
        MLPSpec((4, 3), ("gelu",))  # unknown tag


def test_param_count_accounts_for_biasless_cosine_layer():
    spec = MLPSpec((5, 7, 3), ("cosine", "exp"))
    assert spec.param_count() == 5 * 7 + (7 * 3 + 3)
    dense = MLPSpec((5, 7, 3), ("relu", "identity"))
    assert dense.param_count() == (5 * 7 + 7) + (7 * 3 + 3)


def test_initialization_deterministic_and_bounded():
    spec = MLPSpec((8, 16, 4), ("relu", "identity"))
    a = MLP(spec, seed=11)
    b = MLP(spec, seed=11)
    c = MLP(spec, seed=12)
    for la, lb in zip(a.layers, b.layers):
        np.testing.assert_array_equal(la.weight.data, lb.weight.data)
    assert any(
        not np.array_equal(la.weight.data, lc.weight.data)
        for la, lc in zip(a.layers, c.layers)
    )
    # He bound for the relu layer, Xavier for the identity layer
    assert np.max(np.abs(a.layers[0].weight.data)) <= np.sqrt(6.0 / 8)
    assert np.max(np.abs(a.layers[1].weight.data)) <= np.sqrt(6.0 / (16 + 4))
    for layer in a.layers:
        np.testing.assert_array_equal(layer.bias.data, 0.0)


def test_parameters_lists_weights_and_biases_in_order():
    mlp = MLP(MLPSpec((3, 5, 2), ("cosine", "identity")), seed=0)
    params = mlp.parameters()
    # cosine layer has no bias: weight, weight, bias
    assert len(params) == 3
    assert params[0] is mlp.layers[0].weight
    assert params[2] is mlp.layers[1].bias


# ---------------------------------------------------------------- cosine


def test_cosine_outputs_bounded_and_scale_invariant():
    rng = np.random.default_rng(3)
    layer = CosineSimLayer(Tensor(rng.standard_normal((6, 4)), requires_grad=True))
    x = rng.standard_normal((9, 4))
    out = cosine_forward(layer, tk.as_tensor(x)).data
    assert np.max(np.abs(out)) <= 1.0 + 1e-12
    rescaled = cosine_forward(layer, tk.as_tensor(17.0 * x)).data
    np.testing.assert_allclose(rescaled, out, rtol=1e-12, atol=1e-12)


def test_cosine_zero_row_yields_zero_not_nan():
    layer = CosineSimLayer(Tensor(np.eye(3), requires_grad=True))
    x = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    out = cosine_forward(layer, tk.as_tensor(x))
    np.testing.assert_array_equal(out.data[0], 0.0)
    assert out.data[1, 0] == pytest.approx(1.0)
    backward(tk.sum(out))
    assert np.all(np.isfinite(layer.weight.grad))


def test_cosine_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    w0 = rng.standard_normal((3, 4))
    x0 = rng.standard_normal((5, 4))

    def f(x, w):
        return tk.sum(cosine_forward(CosineSimLayer(w), x))

    assert grad_check(f, [x0, w0]) < 1e-6


def test_cosine_rejects_width_mismatch():
    layer = CosineSimLayer(Tensor(np.ones((2, 4)), requires_grad=True))
    with pytest.raises(ShapeMismatchError):
        cosine_forward(layer, tk.as_tensor(np.ones((3, 5))))


# ----------------------------------------------------------- activations


def test_forward_shapes_and_tags():
    mlp = MLP(MLPSpec((2, 8, 3), ("tanh", "exp")), seed=1)
    out = mlp.forward(tk.as_tensor(np.zeros((5, 2))))
    assert out.shape == (5, 3)
    assert np.all(out.data > 0.0)  # exp output strictly positive
    with pytest.raises(ShapeMismatchError):
        mlp.forward(tk.as_tensor(np.zeros((5, 3))))


def test_exp_activation_clamps_instead_of_overflowing():
    mlp = MLP(MLPSpec((1, 1), ("exp",)), seed=0)
    mlp.layers[0].weight.data[:] = 1.0
    mlp.layers[0].bias.data[:] = 0.0
    out = mlp.forward(tk.as_tensor(np.array([[5000.0], [-5000.0], [2.0]])))
    assert np.all(np.isfinite(out.data))
    assert out.data[0, 0] == pytest.approx(np.exp(EXP_CLAMP))
    assert out.data[1, 0] == pytest.approx(np.exp(-EXP_CLAMP))
    assert out.data[2, 0] == pytest.approx(np.exp(2.0))
    # gradient is zero in the clamped region, alive inside it
    x = Tensor(np.array([[5000.0], [2.0]]), requires_grad=True)
    backward(tk.sum(mlp.forward(x)))
    assert x.grad[0, 0] == 0.0
    assert x.grad[1, 0] == pytest.approx(np.exp(2.0))


def test_forward_with_features_returns_penultimate_activations():
    mlp = MLP(MLPSpec((2, 6, 1), ("relu", "identity")), seed=4)
    x = np.random.default_rng(0).standard_normal((7, 2))
    out, feats = mlp.forward_with_features(tk.as_tensor(x))
    assert out.shape == (7, 1) and feats.shape == (7, 6)
    single = MLP(MLPSpec((2, 1), ("identity",)), seed=0)
    with pytest.raises(ContractError):
        single.forward_with_features(tk.as_tensor(x))


# -------------------------------------------------------------------- adam


def test_adam_matches_two_step_hand_computation():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam([p], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)

    theta = np.array([1.0, -2.0])
    m = np.zeros(2)
    v = np.zeros(2)
    grads = [np.array([0.5, -1.5]), np.array([-0.25, 2.0])]
    for t, g in enumerate(grads, start=1):
        p.grad = g.copy()
        opt.step()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        m_hat = m / (1.0 - 0.9**t)
        v_hat = v / (1.0 - 0.999**t)
        theta = theta - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
        np.testing.assert_allclose(p.data, theta, rtol=1e-15)


def test_adam_skips_none_grads_and_rejects_non_finite():
    p = Tensor(np.array([1.0]), requires_grad=True)
    q = Tensor(np.array([2.0]), requires_grad=True)
    opt = Adam([p, q], lr=0.1)
    p.grad = np.array([1.0])
    q.grad = None
    opt.step()
    assert q.data[0] == 2.0 and p.data[0] != 1.0

    before = p.data.copy()
    p.grad = np.array([np.nan])
    q.grad = np.array([1.0])
    with pytest.raises(NonFiniteGradientError):
        opt.step()
    # nothing was mutated by the rejected step
    np.testing.assert_array_equal(p.data, before)
    assert q.data[0] == 2.0


def test_adam_zero_grad_clears_all():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.array([1.0])
    opt.zero_grad()
    assert p.grad is None


# -------------------------------------------------------------- minibatch


def test_minibatch_indices_cover_everything_once_and_keep_partial_batch():
    rng = np.random.default_rng(0)
    batches = minibatch_indices(10, 4, rng)
    assert [len(b) for b in batches] == [4, 4, 2]
    np.testing.assert_array_equal(np.sort(np.concatenate(batches)), np.arange(10))


def test_minibatch_indices_deterministic_per_seed():
    a = minibatch_indices(20, 7, np.random.default_rng(42))
    b = minibatch_indices(20, 7, np.random.default_rng(42))
    for ba, bb in zip(a, b):
        np.testing.assert_array_equal(ba, bb)
    with pytest.raises(ContractError):
        minibatch_indices(10, 0, np.random.default_rng(0))


# ------------------------------------------------------------------ smoke


def test_small_mlp_learns_a_linear_map():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((128, 2))
    y = x @ np.array([1.5, -2.0]) + 0.5
    mlp = MLP(MLPSpec((2, 16, 1), ("tanh", "identity")), seed=7)
    opt = Adam(mlp.parameters(), lr=0.01)
    first = None
    for epoch in range(120):
        loss = tk.mean(
            tk.power(tk.subtract(tk.take_column(mlp.forward(tk.as_tensor(x)), 0),
                                 tk.as_tensor(y)), 2.0)
        )
        if first is None:
            first = loss.item()
        backward(loss)
        opt.step()
        opt.zero_grad()
    assert loss.item() < 0.05 * first
