"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is built eagerly: every primitive computes its value with
numpy and, when any operand is tracked (a parameter or derived from
one), attaches a :class:`GradNode` holding the parents and a
vector-Jacobian product closure. :func:`backward` walks the graph in
reverse topological order and accumulates adjoints into the leaves.

Broadcasting is deliberately limited to scalar-with-tensor; matrices
meet vectors only through the dedicated ``add_bias`` primitive, so
genuine shape errors fail loudly instead of broadcasting silently.
All storage is 64-bit: the losses evaluate log/digamma near small
arguments where 32-bit precision fails gradient checks.
"""

import numpy as np

from ..errors import ContractError, DomainError, ShapeMismatchError
from . import special


class GradNode:
    """Graph record for one differentiable operation."""

    __slots__ = ("op", "parents", "vjp")

    def __init__(self, op, parents, vjp):
        self.op = op
        self.parents = parents
        self.vjp = vjp


class Tensor:
    """A float64 array plus optional computation-graph node."""

    __slots__ = ("data", "node", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.node = None
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self._tracked()})"

    def _tracked(self):
        return self.requires_grad or self.node is not None

    # operator sugar; all arithmetic routes through the module primitives
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return negative(self)

    def __pow__(self, other):
        return power(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    """Wrap ``x`` as an untracked constant Tensor (pass-through if one)."""
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(op, data, parents, vjp):
    """Build an op-result tensor; attaches a GradNode if any parent is tracked.

    Extension point for composite primitives (e.g. the cosine-similarity
    layer) that supply a hand-derived vjp instead of composing ops.
    """
    out = Tensor(data)
    if any(p._tracked() for p in parents):
        out.node = GradNode(op, tuple(parents), vjp)
    return out


def _conform_elementwise(op, a, b):
    """Check the limited broadcast contract: equal shapes or size-1 operand."""
    if a.data.shape == b.data.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return
    raise ShapeMismatchError(op, a.data.shape, b.data.shape)


def _unbroadcast(g, shape):
    """Reduce an adjoint back to a size-1 operand's shape."""
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _conform_elementwise("add", a, b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return make_node("add", a.data + b.data, (a, b), vjp)


def subtract(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _conform_elementwise("subtract", a, b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return make_node("subtract", a.data - b.data, (a, b), vjp)


def multiply(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _conform_elementwise("multiply", a, b)

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return make_node("multiply", a.data * b.data, (a, b), vjp)


def divide(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _conform_elementwise("divide", a, b)
    if np.any(b.data == 0.0):
        raise DomainError("divide", "zero divisor")

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return make_node("divide", a.data / b.data, (a, b), vjp)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError("matmul", a.data.shape, b.data.shape)

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return make_node("matmul", a.data @ b.data, (a, b), vjp)


def negative(a):
    a = as_tensor(a)
    return make_node("negative", -a.data, (a,), lambda g: (-g,))


def absolute(a):
    a = as_tensor(a)
    sign = np.sign(a.data)  # subgradient 0 at the kink
    return make_node("absolute", np.abs(a.data), (a,), lambda g: (g * sign,))


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)
    return make_node("exp", out_data, (a,), lambda g: (g * out_data,))


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log", "requires strictly positive input")
    return make_node("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def _power_base_grad(base, p, out_data):
    """d(base**p)/d(base) with a finite zero-base subgradient convention."""
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = p * np.power(base, p - 1.0)
    at_zero = np.where(np.asarray(p) == 1.0, 1.0, 0.0)
    return np.where(base == 0.0, at_zero, grad)


def power(a, p):
    """Elementwise a**p; p is a real constant or a conforming tensor.

    Constant p: negative bases allowed only for integer p. Tensor p:
    bases must be non-negative (zero base needs positive exponent).
    At base 0 the base-gradient uses the finite subgradient 0 (1 when
    p == 1) and the exponent-gradient is 0, avoiding inf/nan leaks.
    """
    a = as_tensor(a)
    if isinstance(p, Tensor) or isinstance(p, np.ndarray):
        p = as_tensor(p)
        _conform_elementwise("power", a, p)
        if np.any(a.data < 0.0):
            raise DomainError("power", "negative base with tensor exponent")
        if np.any((a.data == 0.0) & (p.data <= 0.0)):
            raise DomainError("power", "zero base needs positive exponent")
        out_data = np.power(a.data, p.data)

        def vjp(g):
            base_grad = g * _power_base_grad(a.data, p.data, out_data)
            safe = np.where(a.data == 0.0, 1.0, a.data)
            exp_grad = g * np.where(a.data == 0.0, 0.0, out_data * np.log(safe))
            return (
                _unbroadcast(base_grad, a.data.shape),
                _unbroadcast(exp_grad, p.data.shape),
            )

        return make_node("power", out_data, (a, p), vjp)

    p = float(p)
    if np.any(a.data < 0.0) and p != round(p):
        raise DomainError("power", "negative base with non-integer exponent")
    if np.any(a.data == 0.0) and p < 0.0:
        raise DomainError("power", "zero base with negative exponent")
    out_data = np.power(a.data, p)

    def vjp(g):
        return (g * _power_base_grad(a.data, p, out_data),)

    return make_node("power", out_data, (a,), vjp)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0.0
    return make_node("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def softplus(a):
    a = as_tensor(a)
    out_data = np.logaddexp(0.0, a.data)

    def vjp(g):
        # sigmoid evaluated overflow-safe on both tails
        e = np.exp(-np.abs(a.data))
        sig = np.where(a.data >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
        return (g * sig,)

    return make_node("softplus", out_data, (a,), vjp)


def tanh(a):
    a = as_tensor(a)
    out_data = np.tanh(a.data)
    return make_node("tanh", out_data, (a,), lambda g: (g * (1.0 - out_data * out_data),))


def clip(a, lo, hi):
    """Elementwise clamp to [lo, hi]; gradient passes only where unclamped."""
    a = as_tensor(a)
    if lo > hi:
        raise DomainError("clip", f"lo {lo} > hi {hi}")
    out_data = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)
    return make_node("clip", out_data, (a,), lambda g: (g * inside,))


def sum(a):
    a = as_tensor(a)

    def vjp(g):
        return (np.broadcast_to(g, a.data.shape),)

    return make_node("sum", np.sum(a.data), (a,), vjp)


def mean(a):
    a = as_tensor(a)
    n = a.data.size

    def vjp(g):
        return (np.broadcast_to(g / n, a.data.shape),)

    return make_node("mean", np.mean(a.data), (a,), vjp)


def rowsum(a):
    """Sum a [B, n] matrix over its second axis, yielding [B]."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("rowsum", a.data.shape, ("B", "n"))

    def vjp(g):
        return (np.broadcast_to(g[:, None], a.data.shape),)

    return make_node("rowsum", a.data.sum(axis=1), (a,), vjp)


def add_bias(x, b):
    """Add a length-n bias vector to every row of a [B, n] matrix."""
    x, b = as_tensor(x), as_tensor(b)
    if x.data.ndim != 2 or b.data.ndim != 1 or x.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError("add_bias", x.data.shape, b.data.shape)

    def vjp(g):
        return g, g.sum(axis=0)

    return make_node("add_bias", x.data + b.data[None, :], (x, b), vjp)


def take_column(x, j):
    """Extract column j of a [B, n] matrix as a [B] vector."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatchError("take_column", x.data.shape, ("B", "n"))
    if not 0 <= j < x.data.shape[1]:
        raise ContractError(f"take_column: column {j} out of range for {x.data.shape}")

    def vjp(g):
        full = np.zeros_like(x.data)
        full[:, j] = g
        return (full,)

    return make_node("take_column", x.data[:, j].copy(), (x,), vjp)


def transpose(a):
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeMismatchError("transpose", a.data.shape, ("m", "n"))

    def vjp(g):
        return (g.T,)

    return make_node("transpose", a.data.T, (a,), vjp)


def reshape(a, shape):
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def vjp(g):
        return (np.asarray(g).reshape(a.data.shape),)

    return make_node("reshape", out_data, (a,), vjp)


def lgamma(a):
    a = as_tensor(a)
    out_data = special.lgamma(a.data)

    def vjp(g):
        return (g * special.digamma(a.data),)

    return make_node("lgamma", out_data, (a,), vjp)


def digamma(a):
    a = as_tensor(a)
    out_data = special.digamma(a.data)

    def vjp(g):
        return (g * special.trigamma(a.data),)

    return make_node("digamma", out_data, (a,), vjp)


def _topo_order(root):
    """Post-order over graph-bearing tensors reachable from root."""
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in visited or t.node is None:
            continue
        visited.add(id(t))
        stack.append((t, True))
        for parent in t.node.parents:
            stack.append((parent, False))
    return order


def backward(root):
    """Reverse-accumulate adjoints from a scalar root.

    Populates ``.grad`` on every tracked leaf (overwriting any previous
    value) and returns a dict mapping those leaf tensors to their
    adjoints. Multiple uses of one tensor accumulate, not overwrite.
    """
    if root.data.size != 1:
        raise ContractError(f"backward: root must be scalar, got shape {root.data.shape}")
    grads = {id(root): np.ones_like(root.data)}
    leaves = {}
    # post-order lists parents first; the adjoint sweep runs root -> leaves
    for t in reversed(_topo_order(root)):
        g = grads.pop(id(t), None)
        if g is None:
            continue  # unreachable from the root's adjoint flow
        for parent, pg in zip(t.node.parents, t.node.vjp(g)):
            if pg is None or not parent._tracked():
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
            if parent.node is None and parent.requires_grad:
                leaves[key] = parent
    if root.node is None and root.requires_grad:
        leaves[id(root)] = root
    result = {}
    for key, leaf in leaves.items():
        leaf.grad = np.ascontiguousarray(grads[key]).reshape(leaf.data.shape)
        result[leaf] = leaf.grad
    return result


def grad_check(f, params, h=1e-5):
    """Max relative gap between analytic and central-difference gradients.

    ``f`` maps the given parameter tensors to a scalar tensor. Relative
    error per coordinate is |analytic - central| / max(1, |central|);
    the max over all coordinates of all parameters is returned.
    """
    params = [p if isinstance(p, Tensor) else Tensor(p, requires_grad=True) for p in params]
    for p in params:
        p.requires_grad = True
    out = f(*params)
    gmap = backward(out)
    worst = 0.0
    for p in params:
        analytic = gmap.get(p)
        if analytic is None:
            analytic = np.zeros_like(p.data)
        flat = p.data.ravel()
        aflat = np.asarray(analytic).ravel()
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            hi = f(*params).item()
            flat[i] = saved - h
            lo = f(*params).item()
            flat[i] = saved
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise ContractError(
                    f"grad_check: non-finite probe value at coordinate {i}"
                )
            central = (hi - lo) / (2.0 * h)
            err = abs(aflat[i] - central) / max(1.0, abs(central))
            worst = max(worst, err)
    return worst
