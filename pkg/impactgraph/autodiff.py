# impactgraph/autodiff.py
"""
Dense float64 arrays with reverse-mode differentiation.

Ops executed inside `with Tape() as tape:` are recorded in execution order
(which is a topological order); backward(tape, loss, store) walks the
record once in reverse. Outside a tape, ops only compute values.
"""

import math
import struct
import threading

import numpy as np

CHECKPOINT_MAGIC = b"HDGNN-CK\x01"

_context = threading.local()


def _active_tape():
    stack = getattr(_context, "tapes", None)
    return stack[-1] if stack else None


class Array:
    """A float64 ndarray plus the bookkeeping needed for backward()."""

    __slots__ = ("data", "grad", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data.copy()

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Array{label}(shape={self.shape})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data):
    return data if isinstance(data, Array) else Array(data)


class Tape:
    """
    Ordered record of primitive ops: (output, inputs, local backward fn).
    Belongs to one execution context (thread).
    """

    def __init__(self):
        self.entries = []

    def __enter__(self):
        if not hasattr(_context, "tapes"):
            _context.tapes = []
        _context.tapes.append(self)
        return self

    def __exit__(self, *exc):
        _context.tapes.pop()
        return False

    def __len__(self):
        return len(self.entries)

    def record(self, out, inputs, backward_fn):
        self.entries.append((out, inputs, backward_fn))


def _op(value, inputs, backward_fn):
    out = Array(value)
    if any(x.requires_grad for x in inputs):
        out.requires_grad = True
        tape = _active_tape()
        if tape is not None:
            tape.record(out, inputs, backward_fn)
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}") from None


# ----------------------------------
# Elementwise arithmetic
# ----------------------------------
def add(a, b):
    a, b = constant(a), constant(b)
    _broadcast_shape(a, b)
    return _op(a.data + b.data, (a, b),
               lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = constant(a), constant(b)
    _broadcast_shape(a, b)
    return _op(a.data - b.data, (a, b),
               lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = constant(a), constant(b)
    _broadcast_shape(a, b)
    return _op(a.data * b.data, (a, b),
               lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def square(a):
    return _op(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def log(a):
    if np.any(a.data <= 0):
        raise ValueError("log of a non-positive value")
    return _op(np.log(a.data), (a,), lambda g: (g / a.data,))


def exp(a):
    y = np.exp(a.data)
    return _op(y, (a,), lambda g: (g * y,))


# ----------------------------------
# Linear algebra and reshaping
# ----------------------------------
def matmul(a, b):
    a, b = constant(a), constant(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch for matmul: {a.shape} @ {b.shape}")
    return _op(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def concat(arrays, axis=-1):
    arrays = [constant(x) for x in arrays]
    if not arrays:
        raise ValueError("concat of an empty list")
    try:
        value = np.concatenate([x.data for x in arrays], axis=axis)
    except ValueError as e:
        raise ValueError(f"shape mismatch for concat: {e}") from None
    bounds = np.cumsum([x.shape[axis] for x in arrays])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _op(value, tuple(arrays), backward)


def stack(arrays, axis=0):
    arrays = [constant(x) for x in arrays]
    if not arrays:
        raise ValueError("stack of an empty list")
    try:
        value = np.stack([x.data for x in arrays], axis=axis)
    except ValueError as e:
        raise ValueError(f"shape mismatch for stack: {e}") from None

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(arrays)))

    return _op(value, tuple(arrays), backward)


def slice_(a, start, stop, axis=-1):
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _op(a.data[index], (a,), backward)


def take(a, indices):
    """Gather rows (axis 0); the gradient scatter-adds back."""
    indices = np.asarray(indices, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, indices, g)
        return (full,)

    return _op(a.data[indices], (a,), backward)


def reshape(a, shape):
    return _op(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def sum_(a, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _op(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    count = a.size if axis is None else a.shape[axis]
    if count == 0:
        raise ValueError("mean over an empty axis")
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


# ----------------------------------
# Pooling (over one axis, default the sequence axis 0)
# ----------------------------------
def _as_stack(xs, axis):
    if isinstance(xs, (list, tuple)):
        return stack(xs, axis=axis)
    return xs


def sum_pool(xs, axis=0):
    return sum_(_as_stack(xs, axis), axis=axis)


def mean_pool(xs, axis=0):
    return mean(_as_stack(xs, axis), axis=axis)


def max_pool(xs, axis=0):
    """Max over an axis; the gradient goes to the first argmax only."""
    x = _as_stack(xs, axis)
    if x.shape[axis] == 0:
        raise ValueError("max_pool over an empty axis")
    arg = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    value = np.take_along_axis(x.data, arg, axis=axis).squeeze(axis)

    def backward(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, arg, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return _op(value, (x,), backward)


# ----------------------------------
# Activations
# ----------------------------------
def sigmoid(a):
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _op(y, (a,), lambda g: (g * y * (1.0 - y),))


def log_sigmoid(a):
    """log(sigmoid(x)) without underflow."""
    y = -np.logaddexp(0.0, -a.data)
    s = 0.5 * (1.0 + np.tanh(-0.5 * a.data))
    return _op(y, (a,), lambda g: (g * s,))


def tanh(a):
    y = np.tanh(a.data)
    return _op(y, (a,), lambda g: (g * (1.0 - y * y),))


def leaky_relu(a, slope=0.01):
    pos = a.data > 0
    return _op(np.where(pos, a.data, slope * a.data), (a,),
               lambda g: (np.where(pos, g, slope * g),))


GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a):
    """tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))."""
    x = a.data
    t = np.tanh(GELU_C * (x + 0.044715 * x ** 3))
    y = 0.5 * x * (1.0 + t)
    dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return _op(y, (a,), lambda g: (g * dy,))


def softmax(a, axis=-1):
    if a.shape[axis] == 0:
        raise ValueError("softmax over an empty axis")
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _op(y, (a,), backward)


# ----------------------------------
# Backward pass
# ----------------------------------
def backward(tape, loss, store=None):
    """
    Reverse sweep over `tape` from a scalar `loss`.
    Leaf arrays get .grad; every trainable parameter of `store` gets a
    gradient (zeros if it did not take part). Returns {name: grad}.
    """
    if loss.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    produced = {id(out) for out, _, _ in tape.entries}
    if id(loss) not in produced:
        raise ValueError("loss was not recorded on this tape")

    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for out, inputs, fn in reversed(tape.entries):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for x, gx in zip(inputs, fn(g)):
            if gx is None or not x.requires_grad:
                continue
            key = id(x)
            if key in grads:
                grads[key] = grads[key] + gx
            else:
                grads[key] = gx
            if key not in produced:
                leaves[key] = x

    for key, x in leaves.items():
        x.grad = grads[key]

    if store is None:
        return {}
    out = {}
    for name, p in store.items():
        if p.requires_grad:
            if id(p) not in leaves:
                p.grad = np.zeros_like(p.data)
            out[name] = p.grad
    return out


# ----------------------------------
# Parameters
# ----------------------------------
class ParameterStore:
    """Named parameters (insertion-ordered) with optimizer state."""

    def __init__(self, seed=0):
        self._params = {}
        self.state = {}
        self.rng = np.random.default_rng(seed)

    def add(self, name, value, trainable=True):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Array(value, requires_grad=trainable, name=name)
        self._params[name] = p
        return p

    def glorot(self, name, shape):
        fan_in, fan_out = shape[0], shape[-1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, self.rng.uniform(-limit, limit, size=shape))

    def zeros(self, name, shape):
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self):
        return list(self._params)

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def snapshot(self):
        return {name: p.data.copy() for name, p in self._params.items()}

    def load(self, arrays):
        """Copy values in; names must exist and shapes must match."""
        for name, value in arrays.items():
            if name not in self._params:
                raise ValueError(f"unknown parameter {name!r}")
            value = np.asarray(value, dtype=np.float64)
            if value.shape != self._params[name].shape:
                raise ValueError(f"shape mismatch for {name!r}: {value.shape} vs {self._params[name].shape}")
            self._params[name].data = value.copy()

    def freeze(self, prefix):
        for name, p in self._params.items():
            if name.startswith(prefix):
                p.requires_grad = False


def sgd_step(store, lr):
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for _, p in store.items():
        if p.requires_grad and p.grad is not None:
            p.data = p.data - lr * p.grad


def adam_step(store, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for name, p in store.items():
        if not p.requires_grad or p.grad is None:
            continue
        st = store.state.get(name)
        if st is None:
            st = store.state[name] = {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data), "t": 0}
        st["t"] += 1
        st["m"] = beta1 * st["m"] + (1.0 - beta1) * p.grad
        st["v"] = beta2 * st["v"] + (1.0 - beta2) * p.grad * p.grad
        m_hat = st["m"] / (1.0 - beta1 ** st["t"])
        v_hat = st["v"] / (1.0 - beta2 ** st["t"])
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


# ----------------------------------
# Checkpoints
# ----------------------------------
def checkpoint_bytes(store):
    parts = [CHECKPOINT_MAGIC]
    for name, p in store.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", p.ndim))
        parts.append(np.asarray(p.shape, dtype="<u8").tobytes())
        parts.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(store, path):
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(store))


def read_checkpoint(path):
    """Parse a checkpoint file into {name: ndarray} (file order kept)."""
    with open(path, "rb") as f:
        buf = f.read()
    if not buf.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint (bad header)")
    pos = len(CHECKPOINT_MAGIC)
    out = {}
    try:
        while pos < len(buf):
            (n,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos:pos + n].decode("utf-8")
            pos += n
            (ndim,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            dims = tuple(int(d) for d in np.frombuffer(buf, dtype="<u8", count=ndim, offset=pos))
            pos += 8 * ndim
            count = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(dims)
            pos += 8 * count
            out[name] = data.astype(np.float64)
    except (struct.error, ValueError) as e:
        raise ValueError(f"{path}: truncated checkpoint ({e})") from None
    return out


def load_checkpoint(store, path):
    store.load(read_checkpoint(path))


# ----------------------------------
# Finite differences
# ----------------------------------
def numerical_gradient(f, x, eps=1e-4, coords=None):
    """
    Central-difference gradient of scalar f() with respect to ndarray x
    (perturbed in place and restored). `coords` limits the flat indices.
    """
    flat = x.reshape(-1)
    coords = range(flat.size) if coords is None else coords
    grad = np.zeros(flat.size)
    for i in coords:
        old = flat[i]
        flat[i] = old + eps
        up = f()
        flat[i] = old - eps
        down = f()
        flat[i] = old
        grad[i] = (up - down) / (2.0 * eps)
    return grad.reshape(x.shape)


def relative_error(analytic, numeric, floor=1e-2):
    """Max |a - n| / max(|a| + |n|, floor) over all entries."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)))
