"""Minimal dense-tensor numeric core with reverse-mode gradients.

Exactly the op set the encoder needs: 1D/2D convolution (kernel width 3,
stride 1, zero padding 1, no bias), ReLU, 1D max-pooling and 2D
average-pooling (window 2, stride 2, drop-remainder with a keep-1 rule),
affine layers, concatenation, plus the scalar ops used by the losses.
Everything is float64 and bit-reproducible: summation orders are fixed.

Forward math lives in plain ``*_forward`` functions so analysis code can
reuse the identical numeric path without building a graph.
"""

from __future__ import annotations

import struct

import numpy as np

_MAGIC = b"TSNN"
_VERSION = 1


class Tensor:
    """A float64 array plus the recorded op graph for the backward pass."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-mode gradient of this scalar w.r.t. all parameters."""
        if self.data.size != 1:
            raise ValueError("backward requires a scalar loss")
        if not self._parents:
            raise ValueError("backward called on a tensor with no recorded ops")
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)
        # release the record so intermediate activations can be collected
        for node in topo:
            node._parents = ()
            node._backward_fn = None


class Parameter(Tensor):
    """A named trainable tensor."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True)
        self.name = name


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


# ---------------------------------------------------------------------------
# Forward-only numeric kernels

def conv1d_forward(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """x: [C_in, L], k: [C_out, C_in, 3] -> [C_out, L]; stride 1, zero pad 1.

    Written as three shifted matmuls; the tap order fixes the summation order.
    """
    if x.ndim != 2 or k.ndim != 3 or k.shape[2] != 3 or k.shape[1] != x.shape[0]:
        raise ValueError(f"conv1d shape mismatch: input {x.shape}, kernels {k.shape}")
    length = x.shape[1]
    xp = np.pad(x, ((0, 0), (1, 1)))
    out = k[:, :, 0] @ xp[:, :length]
    for off in range(1, 3):
        out += k[:, :, off] @ xp[:, off : off + length]
    return out


def conv2d_forward(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """x: [C_in, H, W], k: [C_out, C_in, 3, 3] -> [C_out, H, W]."""
    if x.ndim != 3 or k.ndim != 4 or k.shape[2:] != (3, 3) or k.shape[1] != x.shape[0]:
        raise ValueError(f"conv2d shape mismatch: input {x.shape}, kernels {k.shape}")
    c_in, h, w = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((k.shape[0], h, w))
    for u in range(3):
        for v in range(3):
            patch = xp[:, u : u + h, v : v + w].reshape(c_in, -1)
            out += (k[:, :, u, v] @ patch).reshape(-1, h, w)
    return out


def maxpool1d_forward(x: np.ndarray):
    """Window 2, stride 2, trailing element dropped; length-1 input passes through."""
    c, length = x.shape
    if length == 1:
        return x.copy(), None
    half = length // 2
    grouped = x[:, : 2 * half].reshape(c, half, 2)
    arg = grouped.argmax(axis=2)  # first maximal element wins ties
    out = np.take_along_axis(grouped, arg[:, :, None], axis=2)[:, :, 0]
    return out, arg


def avgpool2d_forward(x: np.ndarray):
    """Per-axis window 2 stride 2 with drop-remainder; size-1 axes pass through."""
    c, h, w = x.shape
    wh = 2 if h >= 2 else 1
    ww = 2 if w >= 2 else 1
    h2, w2 = h // wh, w // ww
    trimmed = x[:, : h2 * wh, : w2 * ww].reshape(c, h2, wh, w2, ww)
    return trimmed.mean(axis=(2, 4)), (wh, ww)


# ---------------------------------------------------------------------------
# Graph ops

def conv1d(x: Tensor, k: Tensor) -> Tensor:
    out = conv1d_forward(x.data, k.data)
    xp = np.pad(x.data, ((0, 0), (1, 1)))
    length = x.data.shape[1]

    def backward(g):
        if k.requires_grad:
            kg = np.empty_like(k.data)
            for off in range(3):
                kg[:, :, off] = g @ xp[:, off : off + length].T
            k._accumulate(kg)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for off in range(3):
                dxp[:, off : off + length] += k.data[:, :, off].T @ g
            x._accumulate(dxp[:, 1 : length + 1])

    return _make(out, (x, k), backward)


def conv2d(x: Tensor, k: Tensor) -> Tensor:
    out = conv2d_forward(x.data, k.data)
    xp = np.pad(x.data, ((0, 0), (1, 1), (1, 1)))
    c_in, h, w = x.data.shape

    def backward(g):
        gflat = g.reshape(g.shape[0], -1)
        if k.requires_grad:
            kg = np.empty_like(k.data)
            for u in range(3):
                for v in range(3):
                    patch = xp[:, u : u + h, v : v + w].reshape(c_in, -1)
                    kg[:, :, u, v] = gflat @ patch.T
            k._accumulate(kg)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for u in range(3):
                for v in range(3):
                    dxp[:, u : u + h, v : v + w] += (
                        k.data[:, :, u, v].T @ gflat
                    ).reshape(c_in, h, w)
            x._accumulate(dxp[:, 1 : h + 1, 1 : w + 1])

    return _make(out, (x, k), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # subgradient at 0 is 0

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), backward)


def maxpool1d(x: Tensor) -> Tensor:
    out, arg = maxpool1d_forward(x.data)
    c, length = x.data.shape

    def backward(g):
        if not x.requires_grad:
            return
        if arg is None:
            x._accumulate(g)
            return
        half = length // 2
        dgrouped = np.zeros((c, half, 2))
        np.put_along_axis(dgrouped, arg[:, :, None], g[:, :, None], axis=2)
        dx = np.zeros_like(x.data)
        dx[:, : 2 * half] = dgrouped.reshape(c, 2 * half)
        x._accumulate(dx)

    return _make(out, (x,), backward)


def avgpool2d(x: Tensor) -> Tensor:
    out, (wh, ww) = avgpool2d_forward(x.data)
    c, h, w = x.data.shape
    h2, w2 = out.shape[1], out.shape[2]

    def backward(g):
        if not x.requires_grad:
            return
        dx = np.zeros_like(x.data)
        spread = np.broadcast_to(
            g[:, :, None, :, None] / (wh * ww), (c, h2, wh, w2, ww)
        )
        dx[:, : h2 * wh, : w2 * ww] = spread.reshape(c, h2 * wh, w2 * ww)
        x._accumulate(dx)

    return _make(out, (x,), backward)


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """weight @ x + bias for a vector x."""
    if x.data.ndim != 1 or weight.data.shape[1] != x.data.shape[0]:
        raise ValueError(f"affine shape mismatch: input {x.shape}, weight {weight.shape}")
    out = weight.data @ x.data + bias.data

    def backward(g):
        if weight.requires_grad:
            weight._accumulate(np.outer(g, x.data))
        if bias.requires_grad:
            bias._accumulate(g)
        if x.requires_grad:
            x._accumulate(weight.data.T @ g)

    return _make(out, (x, weight, bias), backward)


def linear_cols(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Apply weight @ column + bias to every column of x: [in, L] -> [out, L]."""
    if x.data.ndim != 2 or weight.data.shape[1] != x.data.shape[0]:
        raise ValueError(f"linear_cols shape mismatch: input {x.shape}, weight {weight.shape}")
    out = weight.data @ x.data + bias.data[:, None]

    def backward(g):
        if weight.requires_grad:
            weight._accumulate(g @ x.data.T)
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=1))
        if x.requires_grad:
            x._accumulate(weight.data.T @ g)

    return _make(out, (x, weight, bias), backward)


def channel_proj(x: Tensor, weight: Tensor) -> Tensor:
    """1x1 channel projection: [C_in, ...] -> [C_out, ...]."""
    c_in = x.data.shape[0]
    if weight.data.shape[1] != c_in:
        raise ValueError(f"channel_proj shape mismatch: input {x.shape}, weight {weight.shape}")
    flat = x.data.reshape(c_in, -1)
    out = (weight.data @ flat).reshape(weight.data.shape[0], *x.data.shape[1:])

    def backward(g):
        gflat = g.reshape(weight.data.shape[0], -1)
        if weight.requires_grad:
            weight._accumulate(gflat @ flat.T)
        if x.requires_grad:
            x._accumulate((weight.data.T @ gflat).reshape(x.data.shape))

    return _make(out, (x, weight), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _make(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} vs {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _make(a.data - b.data, (a, b), backward)


def add_const(x: Tensor, c: float) -> Tensor:
    def backward(g):
        if x.requires_grad:
            x._accumulate(g)

    return _make(x.data + c, (x,), backward)


def scale(x: Tensor, c: float) -> Tensor:
    def backward(g):
        if x.requires_grad:
            x._accumulate(g * c)

    return _make(x.data * c, (x,), backward)


def absolute(x: Tensor) -> Tensor:
    sign = np.sign(x.data)  # subgradient at 0 is 0

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * sign)

    return _make(np.abs(x.data), (x,), backward)


def concat(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise ValueError("concat expects 1-D tensors")
    na = a.data.shape[0]

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[:na])
        if b.requires_grad:
            b._accumulate(g[na:])

    return _make(np.concatenate([a.data, b.data]), (a, b), backward)


def flatten(x: Tensor) -> Tensor:
    shape = x.data.shape

    def backward(g):
        if x.requires_grad:
            x._accumulate(g.reshape(shape))

    return _make(x.data.reshape(-1), (x,), backward)


def tsum(x: Tensor) -> Tensor:
    def backward(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, float(g)))

    return _make(x.data.sum(), (x,), backward)


def euclidean(a: Tensor, b: Tensor) -> Tensor:
    """Euclidean distance between two vectors as a scalar tensor."""
    diff = a.data - b.data
    dist = float(np.sqrt((diff * diff).sum()))

    def backward(g):
        if dist == 0.0:
            return  # subgradient 0 at coincident points
        d = float(g) * diff / dist
        if a.requires_grad:
            a._accumulate(d)
        if b.requires_grad:
            b._accumulate(-d)

    return _make(dist, (a, b), backward)


# ---------------------------------------------------------------------------
# Optimizer

class Adam:
    """Bias-corrected Adam over a fixed parameter list."""

    def __init__(self, params: list[Parameter], lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * (g * g)
            m_hat = self.m[i] / (1 - self.beta1**t)
            v_hat = self.v[i] / (1 - self.beta2**t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------
# Checkpoint serialization

def save_params(path, params: list[Parameter], fileobj=None):
    """Write parameters as the binary checkpoint block (magic TSNN)."""
    f = fileobj or open(path, "wb")
    try:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<I", len(params)))
        for p in params:
            raw = p.name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", p.data.ndim))
            for dim in p.data.shape:
                f.write(struct.pack("<I", dim))
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    finally:
        if fileobj is None:
            f.close()


def load_params(path, fileobj=None) -> dict[str, np.ndarray]:
    f = fileobj or open(path, "rb")
    try:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad checkpoint magic: {magic!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}, expected {_VERSION}")
        (count,) = struct.unpack("<I", f.read(4))
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", f.read(4))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(n * 8), dtype="<f8").reshape(shape).copy()
            out[name] = data
        return out
    finally:
        if fileobj is None:
            f.close()
