"""Dense-tensor engine with reverse-mode automatic differentiation.

A Tape records executed ops in topological order; backward() replays the
record once in reverse, accumulating vector-Jacobian products. Storage is
float32 by default (training) with float64 available for verification runs.
Broadcasting is restricted to scalar-with-tensor and numpy's trailing
dimension rules; anything else raises ShapeError instead of guessing.

Forward/backward of one tape is single-threaded; independent tapes are safe
on separate threads.
"""

from __future__ import annotations

import threading

import numpy as np


DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Operand shapes do not conform for the attempted op."""


class NumericsError(FloatingPointError):
    """An op produced NaN/Inf values."""


class _State(threading.local):
    def __init__(self):
        self.tapes = []
        self.nan_checks = False


_STATE = _State()


def set_nan_checks(enabled):
    """Toggle per-op NaN/Inf output validation (off in hot loops)."""
    _STATE.nan_checks = bool(enabled)


class no_grad:
    """Context manager suspending tape recording."""

    def __enter__(self):
        self._saved = _STATE.tapes
        _STATE.tapes = []
        return self

    def __exit__(self, *exc):
        _STATE.tapes = self._saved
        return False


class Tape:
    """Ordered record of executed ops; inputs of node i precede node i."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _STATE.tapes.append(self)
        return self

    def __exit__(self, *exc):
        popped = _STATE.tapes.pop()
        assert popped is self
        return False


def _active_tape():
    return _STATE.tapes[-1] if _STATE.tapes else None


class Node:
    __slots__ = ("op", "inputs", "output", "vjp")

    def __init__(self, op, inputs, output, vjp):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.vjp = vjp


class Tensor:
    """N-dimensional array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_is_op_output")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._is_op_output = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    # arithmetic operators (implemented by ops below)
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def parameter(data, name=None, dtype=None):
    """Leaf tensor holding learnable weights."""
    return Tensor(np.array(data, dtype=dtype or DEFAULT_DTYPE), requires_grad=True, name=name)


def constant(data, dtype=None):
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=False)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=DEFAULT_DTYPE))


def _check_broadcast(op, a, b):
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None
    return shape


def _unbroadcast(grad, shape):
    """Reduce grad of a broadcast result back to the operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def record(op, inputs, out_data, vjp):
    """Register an op result on the active tape.

    vjp(grad_out) must return a tuple of gradients aligned with inputs
    (None for inputs that need no gradient).
    """
    if _STATE.nan_checks and not np.all(np.isfinite(out_data)):
        raise NumericsError(f"{op}: produced non-finite values")
    out = Tensor(out_data)
    tape = _active_tape()
    needs = any(isinstance(t, Tensor) and t.requires_grad for t in inputs)
    if tape is not None and needs:
        out.requires_grad = True
        out._is_op_output = True
        tape.nodes.append(Node(op, tuple(inputs), out, vjp))
    return out


def backward(tape, root):
    """Accumulate d(root)/d(leaf) into every leaf's grad slot."""
    if not isinstance(root, Tensor):
        raise TypeError("backward root must be a Tensor")
    if root.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    if not tape.nodes:
        raise ValueError("backward: tape is empty")
    grads = {id(root): np.ones_like(root.data)}
    for node in reversed(tape.nodes):
        g_out = grads.pop(id(node.output), None)
        if g_out is None:
            continue
        g_inputs = node.vjp(g_out)
        for t, g in zip(node.inputs, g_inputs):
            if g is None or not isinstance(t, Tensor) or not t.requires_grad:
                continue
            if g.shape != t.data.shape:
                raise ShapeError(f"{node.op}: vjp shape {g.shape} != input shape {t.data.shape}")
            if t._is_op_output:
                key = id(t)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
            else:
                if t.grad is None:
                    t.grad = g.astype(t.data.dtype, copy=True)
                else:
                    t.grad = t.grad + g.astype(t.data.dtype)


# ---------------------------------------------------------------------------
# elementwise and arithmetic ops


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("add", a.data, b.data)
    out = a.data + b.data
    return record("add", (a, b), out,
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("sub", a.data, b.data)
    out = a.data - b.data
    return record("sub", (a, b), out,
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("mul", a.data, b.data)
    out = a.data * b.data
    return record("mul", (a, b), out,
                  lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("div", a.data, b.data)
    out = a.data / b.data
    return record("div", (a, b), out,
                  lambda g: (_unbroadcast(g / b.data, a.shape),
                             _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def neg(a):
    a = _as_tensor(a)
    return record("neg", (a,), -a.data, lambda g: (-g,))


def pow_(a, p):
    a = _as_tensor(a)
    p = float(p)
    out = a.data ** p
    return record("pow", (a,), out, lambda g: (g * p * a.data ** (p - 1.0),))


def exp(a):
    a = _as_tensor(a)
    out = np.exp(a.data)
    return record("exp", (a,), out, lambda g: (g * out,))


def log(a):
    a = _as_tensor(a)
    out = np.log(a.data)
    return record("log", (a,), out, lambda g: (g / a.data,))


def sqrt(a):
    a = _as_tensor(a)
    out = np.sqrt(a.data)
    return record("sqrt", (a,), out, lambda g: (g * 0.5 / out,))


def abs_(a):
    a = _as_tensor(a)
    out = np.abs(a.data)
    return record("abs", (a,), out, lambda g: (g * np.sign(a.data),))


def relu(a):
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)
    return record("relu", (a,), out, lambda g: (g * (a.data > 0.0),))


def leaky_relu(a, alpha=0.2):
    a = _as_tensor(a)
    out = np.where(a.data >= 0.0, a.data, alpha * a.data)
    return record("leaky_relu", (a,), out,
                  lambda g: (g * np.where(a.data >= 0.0, 1.0, alpha).astype(g.dtype),))


def sigmoid(a):
    a = _as_tensor(a)
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return record("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def tanh(a):
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return record("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def softplus(a):
    a = _as_tensor(a)
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    sig = 1.0 / (1.0 + np.exp(-np.clip(x, -60, 60)))
    return record("softplus", (a,), out, lambda g: (g * sig,))


def clamp(a, lo=None, hi=None):
    a = _as_tensor(a)
    out = np.clip(a.data, lo, hi)
    inside = np.ones_like(a.data, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi
    return record("clamp", (a,), out, lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# linear algebra, shape, and reduction ops


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform") from None

    def vjp(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            return (g * bd, g * ad)
        if ad.ndim == 1:
            # (k,) @ (..., k, n) -> (..., n)
            ga = np.matmul(bd, g[..., None])[..., 0]
            ga = _unbroadcast(ga, ad.shape)
            gb = ad[:, None] * g[..., None, :]
            return (ga, _unbroadcast(gb, bd.shape))
        if bd.ndim == 1:
            # (..., m, k) @ (k,) -> (..., m)
            ga = g[..., None] * bd
            gb = np.matmul(np.swapaxes(ad, -1, -2), g[..., None])[..., 0]
            return (_unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape))
        ga = np.matmul(g, np.swapaxes(bd, -1, -2))
        gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        return (_unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape))

    return record("matmul", (a, b), out, vjp)


def reshape(a, *shape):
    a = _as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    out = a.data.reshape(shape)
    return record("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None):
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    inv = None if axes is None else tuple(np.argsort(axes))
    return record("transpose", (a,), out, lambda g: (np.transpose(g, inv),))


def getitem(a, key):
    a = _as_tensor(a)
    out = a.data[key]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[key] += g
        return (full,)

    return record("slice", (a,), np.array(out, copy=True), vjp)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return record("concat", tuple(tensors), out, vjp)


def broadcast_to(a, shape):
    a = _as_tensor(a)
    try:
        out = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError(f"broadcast: {a.shape} does not broadcast to {shape}") from None
    return record("broadcast", (a,), np.array(out), lambda g: (_unbroadcast(g, a.shape),))


def sum_(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record("sum", (a,), out, vjp)


def mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        n = a.size
    else:
        ax = (axis,) if isinstance(axis, int) else tuple(axis)
        n = int(np.prod([a.shape[i] for i in ax]))

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return record("mean", (a,), out, vjp)


def l2_norm(a):
    """Euclidean norm of the flattened tensor (smooth away from 0)."""
    a = _as_tensor(a)
    val = float(np.sqrt((a.data.astype(np.float64) ** 2).sum()))
    out = np.array(val, dtype=a.dtype)
    return record("l2_norm", (a,), out, lambda g: (g * a.data / max(val, 1e-30),))


# ---------------------------------------------------------------------------
# convolution family (NCHW layout, explicit stride/padding)


def _pair(v):
    return (v, v) if isinstance(v, int) else tuple(v)


def _im2col(xp, kh, kw, sh, sw, ho, wo):
    b, c = xp.shape[0], xp.shape[1]
    cols = np.empty((b, c, kh, kw, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw]
    return cols.reshape(b, c * kh * kw, ho * wo)


def _col2im(cols, xshape, kh, kw, sh, sw, ho, wo):
    b, c, hp, wp = xshape
    out = np.zeros(xshape, dtype=cols.dtype)
    cols = cols.reshape(b, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += cols[:, :, i, j]
    return out


def conv2d(x, w, b=None, stride=1, padding=0):
    """2-D convolution, x:(B,Cin,H,W) w:(Cout,Cin,kh,kw) b:(Cout,)."""
    x, w = _as_tensor(x), _as_tensor(w)
    if b is not None:
        b = _as_tensor(b)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: x {x.shape} incompatible with w {w.shape}")
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    bn, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d: kernel {w.shape} too large for input {x.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    cols = _im2col(xp, kh, kw, sh, sw, ho, wo)
    wr = w.data.reshape(cout, cin * kh * kw)
    out = np.matmul(wr, cols).reshape(bn, cout, ho, wo)
    if b is not None:
        out = out + b.data.reshape(1, cout, 1, 1)

    def vjp(g):
        gr = g.reshape(bn, cout, ho * wo)
        gw = np.einsum("bol,bkl->ok", gr, cols).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            dcols = np.matmul(wr.T, gr)
            gxp = _col2im(dcols, xp.shape, kh, kw, sh, sw, ho, wo)
            gx = gxp[:, :, ph:ph + h, pw:pw + wd] if (ph or pw) else gxp
        gb = gr.sum(axis=(0, 2)) if b is not None and b.requires_grad else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    inputs = (x, w, b) if b is not None else (x, w)
    return record("conv2d", inputs, out, vjp)


def conv_transpose2d(x, w, b=None, stride=1, padding=0, output_padding=0):
    """Transposed 2-D convolution, x:(B,Cin,H,W) w:(Cin,Cout,kh,kw)."""
    x, w = _as_tensor(x), _as_tensor(w)
    if b is not None:
        b = _as_tensor(b)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"conv_transpose2d: x {x.shape} incompatible with w {w.shape}")
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    oh, ow = _pair(output_padding)
    bn, cin, h, wd = x.shape
    _, cout, kh, kw = w.shape
    hout = (h - 1) * sh - 2 * ph + kh + oh
    wout = (wd - 1) * sw - 2 * pw + kw + ow
    wr = w.data.reshape(cin, cout * kh * kw)
    cols = np.matmul(wr.T, x.data.reshape(bn, cin, h * wd))
    padded_shape = (bn, cout, hout + 2 * ph, wout + 2 * pw)
    yp = _col2im(cols, padded_shape, kh, kw, sh, sw, h, wd)
    out = yp[:, :, ph:ph + hout, pw:pw + wout] if (ph or pw) else yp
    if b is not None:
        out = out + b.data.reshape(1, cout, 1, 1)

    def vjp(g):
        gp = np.pad(g, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else g
        gcols = _im2col(gp, kh, kw, sh, sw, h, wd)
        gx = None
        if x.requires_grad:
            gx = np.matmul(wr, gcols).reshape(x.shape)
        gw = None
        if w.requires_grad:
            gw = np.einsum("bil,bkl->ik", x.data.reshape(bn, cin, h * wd), gcols).reshape(w.shape)
        gb = g.sum(axis=(0, 2, 3)) if b is not None and b.requires_grad else None
        return (gx, gw, gb) if b is not None else (gx, gw)

    inputs = (x, w, b) if b is not None else (x, w)
    return record("conv_transpose2d", inputs, out, vjp)


def avg_pool2d(x, k=2):
    x = _as_tensor(x)
    bn, c, h, w = x.shape
    if h % k or w % k:
        raise ShapeError(f"avg_pool2d: size {x.shape} not divisible by {k}")
    out = x.data.reshape(bn, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def vjp(g):
        g = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k)
        return (g,)

    return record("avg_pool2d", (x,), out, vjp)


def upsample_nearest(x, scale=2):
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"upsample_nearest: expected NCHW, got {x.shape}")
    out = np.repeat(np.repeat(x.data, scale, axis=2), scale, axis=3)

    def vjp(g):
        bn, c, h, w = x.shape
        g = g.reshape(bn, c, h, scale, w, scale).sum(axis=(3, 5))
        return (g,)

    return record("upsample_nearest", (x,), out, vjp)


def _linear_interp_matrix(n_in, n_out, dtype):
    """Row-stochastic matrix mapping n_in samples to n_out (align_corners=False)."""
    m = np.zeros((n_out, n_in), dtype=dtype)
    scale = n_in / n_out
    for o in range(n_out):
        src = (o + 0.5) * scale - 0.5
        i0 = int(np.floor(src))
        t = src - i0
        i0c = min(max(i0, 0), n_in - 1)
        i1c = min(max(i0 + 1, 0), n_in - 1)
        m[o, i0c] += 1.0 - t
        m[o, i1c] += t
    return m


def upsample_bilinear(x, scale=2):
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"upsample_bilinear: expected NCHW, got {x.shape}")
    bn, c, h, w = x.shape
    mh = _linear_interp_matrix(h, h * scale, x.data.dtype)
    mw = _linear_interp_matrix(w, w * scale, x.data.dtype)
    out = np.einsum("oi,bcij,pj->bcop", mh, x.data, mw, optimize=True)

    def vjp(g):
        return (np.einsum("oi,bcop,pj->bcij", mh, g, mw, optimize=True),)

    return record("upsample_bilinear", (x,), out, vjp)


def pad2d(x, pad):
    """Zero padding ((top,bottom),(left,right)) on the last two dims."""
    x = _as_tensor(x)
    (pt, pb), (pl, pr) = pad
    width = [(0, 0)] * (x.ndim - 2) + [(pt, pb), (pl, pr)]
    out = np.pad(x.data, width)

    def vjp(g):
        sl = [slice(None)] * (x.ndim - 2) + [slice(pt, g.shape[-2] - pb), slice(pl, g.shape[-1] - pr)]
        return (g[tuple(sl)],)

    return record("pad2d", (x,), out, vjp)
