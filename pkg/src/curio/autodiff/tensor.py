"""Dense float64 tensors with reverse-mode differentiation.

Every op records a closure that maps the output gradient to input gradients.
Only tensors that (transitively) require gradients build the tape.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op="leaf"):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed gradient needs a scalar")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward, op):
    req = any(p.requires_grad for p in parents)
    if not req:
        return Tensor(data, op=op)
    return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward, op=op)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, d in enumerate(shape):
        if d == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _check_broadcast(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)), "div")


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,), "exp")


def log(x):
    x = as_tensor(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def square(x):
    x = as_tensor(x)
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


def sqrt_abs(x):
    """sqrt(|x|); the gradient is taken as 0 at x == 0."""
    x = as_tensor(x)
    out = np.sqrt(np.abs(x.data))

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(out > 0, np.sign(x.data) * 0.5 / np.where(out > 0, out, 1.0), 0.0)
        return (g * d,)

    return _make(out, (x,), backward, "sqrt_abs")


def clip(x, lo, hi):
    x = as_tensor(x)
    mask = (x.data >= lo) & (x.data <= hi)
    return _make(np.clip(x.data, lo, hi), (x,), lambda g: (g * mask,), "clip")


def minimum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "minimum")
    pick_a = a.data <= b.data
    return _make(np.minimum(a.data, b.data), (a, b),
                 lambda g: (_unbroadcast(g * pick_a, a.shape),
                            _unbroadcast(g * ~pick_a, b.shape)), "minimum")


def maximum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "maximum")
    pick_a = a.data >= b.data
    return _make(np.maximum(a.data, b.data), (a, b),
                 lambda g: (_unbroadcast(g * pick_a, a.shape),
                            _unbroadcast(g * ~pick_a, b.shape)), "maximum")


def detach(x):
    x = as_tensor(x)
    return Tensor(x.data, op="detach")


# ---------------------------------------------------------------------------
# shape ops and reductions


def reshape(x, shape):
    x = as_tensor(x)
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def index(x, idx):
    x = as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(x.data[idx], (x,), backward, "index")


def concat(xs, axis=-1):
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    try:
        out = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    splits = np.cumsum(sizes)[:-1]
    return _make(out, xs, lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def stack(xs, axis=1):
    xs = [as_tensor(x) for x in xs]
    try:
        out = np.stack([x.data for x in xs], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack: {e}") from None
    n = len(xs)
    return _make(out, xs,
                 lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)), "stack")


def pad_last(x, width):
    """Zero-pad the last axis up to ``width``."""
    x = as_tensor(x)
    cur = x.shape[-1]
    if cur == width:
        return x
    if cur > width:
        raise ShapeError(f"pad_last: cannot pad {cur} down to {width}")
    pad = [(0, 0)] * (x.ndim - 1) + [(0, width - cur)]
    return _make(np.pad(x.data, pad), (x,), lambda g: (g[..., :cur],), "pad")


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, (x,), backward, "sum")


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    if n == 0:
        shape = () if axis is None else np.delete(np.array(x.shape), axis).tolist()
        if keepdims and axis is not None:
            shape = list(x.shape)
            shape[axis] = 1
        return _make(np.zeros(shape), (x,), lambda g: (np.zeros_like(x.data),), "mean")
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[0] or b.ndim != 2:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T,
                            a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])),
                 "matmul")


# ---------------------------------------------------------------------------
# vector ops over the trailing axis


def l2_norm(x):
    """Euclidean norm over the last axis (gradient 0 at the origin)."""
    x = as_tensor(x)
    out = np.sqrt(np.sum(x.data * x.data, axis=-1))

    def backward(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out[..., None] > 0, x.data / safe[..., None], 0.0) * g[..., None],)

    return _make(out, (x,), backward, "l2_norm")


def l2_distance(a, b):
    return l2_norm(sub(a, b))


def dot(a, b):
    return tsum(mul(a, b), axis=-1)


def mse(a, b):
    """Mean squared error over the last axis."""
    d = sub(a, b)
    return mean(square(d), axis=-1)


def log_softmax(logits):
    x = as_tensor(logits)
    m = x.data.max(axis=-1, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)
    return _make(out, (x,),
                 lambda g: (g - soft * g.sum(axis=-1, keepdims=True),), "log_softmax")


def take_last(x, idx):
    """x[..., idx] per row; ``idx`` is an integer array over the leading axes."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(idx.size)
    flat = x.data.reshape(-1, x.shape[-1])
    out = flat[rows, idx.reshape(-1)].reshape(idx.shape)

    def backward(g):
        full = np.zeros_like(flat)
        full[rows, idx.reshape(-1)] = g.reshape(-1)
        return (full.reshape(x.shape),)

    return _make(out, (x,), backward, "take")


def softmax_nll(logits, target):
    """-log softmax(logits)[target] per row."""
    return mul(take_last(log_softmax(logits), target), -1.0)


def list_variance(x):
    """Mean squared distance to the list mean: x is (..., L, d) -> (...)."""
    x = as_tensor(x)
    if x.shape[-2] == 0:
        return Tensor(np.zeros(x.shape[:-2]))
    centre = mean(x, axis=-2, keepdims=True)
    return mean(tsum(square(sub(x, centre)), axis=-1), axis=-1)


# ---------------------------------------------------------------------------
# convolution


def _im2col(x, k, stride, pad):
    B, C, H, W = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (H + 2 * pad - k) // stride + 1
    ow = (W + 2 * pad - k) // stride + 1
    cols = np.empty((B, C, k, k, oh, ow))
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride]
    return cols, oh, ow


def conv2d(x, w, b, stride=1, pad=0):
    """x: (B, C, H, W); w: (O, C, k, k); b: (O,) -> (B, O, OH, OW)."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv2d: incompatible shapes {x.shape} and {w.shape}")
    B, C, H, W = x.shape
    O, _, k, _ = w.shape
    cols, oh, ow = _im2col(x.data, k, stride, pad)
    flat = cols.reshape(B, C * k * k, oh * ow)
    wf = w.data.reshape(O, -1)
    out = np.einsum("ok,bkp->bop", wf, flat).reshape(B, O, oh, ow) + b.data[None, :, None, None]

    def backward(g):
        gf = g.reshape(B, O, oh * ow)
        gw = np.einsum("bop,bkp->ok", gf, flat).reshape(w.shape)
        gb = g.sum(axis=(0, 2, 3))
        gx = None
        if x.requires_grad:
            gcols = np.einsum("ok,bop->bkp", wf, gf).reshape(B, C, k, k, oh, ow)
            gxp = np.zeros((B, C, H + 2 * pad, W + 2 * pad))
            for i in range(k):
                for j in range(k):
                    gxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += gcols[:, :, i, j]
            gx = gxp[:, :, pad:pad + H, pad:pad + W]
        return (gx, gw, gb)

    return _make(out, (x, w, b), backward, "conv2d")


# ---------------------------------------------------------------------------
# verification harness


def gradient_check(f, point, probe_seed=0, step=1e-5, kink=1e-4):
    """Largest relative error between reverse-mode and central-difference gradients.

    ``f`` maps Tensors to a scalar Tensor.  ``point`` is an array or a list of
    arrays.  Entries closer than ``kink`` to zero are pushed away from it so
    abs/rectifier kinks are not straddled by the difference stencil.
    """
    single = not isinstance(point, (list, tuple))
    arrays = [np.array(p, dtype=np.float64, copy=True) for p in ([point] if single else point)]
    rng = np.random.default_rng(probe_seed)
    for a in arrays:
        near = np.abs(a) < kink
        if near.any():
            signs = np.where(rng.random(a.shape) < 0.5, -1.0, 1.0)
            a[near] = signs[near] * kink * (2.0 + rng.random(a.shape)[near])

    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    out = f(*leaves)
    out.backward()
    analytic = [l.grad if l.grad is not None else np.zeros_like(l.data) for l in leaves]

    worst = 0.0
    for li, a in enumerate(arrays):
        flat = a.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            hi = f(*[Tensor(x) for x in arrays]).item()
            flat[j] = orig - step
            lo = f(*[Tensor(x) for x in arrays]).item()
            flat[j] = orig
            numeric = (hi - lo) / (2 * step)
            exact = analytic[li].reshape(-1)[j]
            denom = max(abs(numeric), abs(exact), 1e-3)
            worst = max(worst, abs(numeric - exact) / denom)
    return worst
