"""Convolutional patch-to-displacement regressor with hand-written gradients.

No autodiff: each layer implements forward/backward explicitly, and the
backward pass is validated against 64-bit central finite differences in the
test suite. Parameters are float32 by default for speed; pass
dtype=np.float64 when checking gradients.

Architecture descriptors are token lists, e.g.

    ["conv3x3/1/8", "relu", "pool2", ..., "flatten", "dense128", "relu", "dense2"]

Convolutions use stride s and zero padding (k-1)//2; pooling is 2x2/2.
The final layer must be dense with width 2 (the displacement).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (BadArchitecture, BadMagic, EmptyDataset, ShapeMismatch,
                     TruncatedFile)
from .patches import PatchDataset, standardize_patch

CKPT_MAGIC = b"DPMCKPT1\n"

DEFAULT_ARCH = (
    "conv3x3/1/8", "relu", "pool2",
    "conv3x3/1/16", "relu", "pool2",
    "conv3x3/1/32", "relu", "pool2",
    "flatten", "dense128", "relu", "dense2",
)

_CONV_RE = re.compile(r"^conv(\d+)x(\d+)/(\d+)/(\d+)$")
_DENSE_RE = re.compile(r"^dense(\d+)$")


def _im2col(x, k, stride):
    """(N, C, H, W) -> (N, out_h * out_w, C * k * k) patch matrix."""
    N, C, H, W = x.shape
    out_h = (H - k) // stride + 1
    out_w = (W - k) // stride + 1
    s0, s1, s2, s3 = x.strides
    win = np.lib.stride_tricks.as_strided(
        x, (N, C, out_h, out_w, k, k),
        (s0, s1, s2 * stride, s3 * stride, s2, s3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(N, out_h * out_w, C * k * k)
    return np.ascontiguousarray(cols), out_h, out_w


class Conv:
    """k x k convolution, stride s, zero padding (k-1)//2."""

    def __init__(self, k, stride, c_in, c_out, dtype):
        self.k, self.stride, self.c_in, self.c_out = k, stride, c_in, c_out
        self.w = np.zeros((c_out, c_in, k, k), dtype=dtype)
        self.b = np.zeros(c_out, dtype=dtype)

    def out_shape(self, c, h, w):
        p = (self.k - 1) // 2
        if c != self.c_in:
            raise BadArchitecture(f"conv expects {self.c_in} channels, got {c}")
        oh = (h + 2 * p - self.k) // self.stride + 1
        ow = (w + 2 * p - self.k) // self.stride + 1
        if oh < 1 or ow < 1:
            raise BadArchitecture(f"conv collapses {h}x{w} input")
        return self.c_out, oh, ow

    def forward(self, x):
        p = (self.k - 1) // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols, oh, ow = _im2col(xp, self.k, self.stride)
        self._cols, self._in_shape = cols, x.shape
        wmat = self.w.reshape(self.c_out, -1)
        y = cols @ wmat.T + self.b
        return y.transpose(0, 2, 1).reshape(x.shape[0], self.c_out, oh, ow)

    def backward(self, dy):
        N, _, oh, ow = dy.shape
        # one contiguous (N*ohw, c_out) copy so both products hit plain gemm
        dyt = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(-1, self.c_out)
        wmat = self.w.reshape(self.c_out, -1)
        cols2 = self._cols.reshape(-1, self._cols.shape[-1])
        dw = dyt.T @ cols2
        db = dyt.sum(axis=0)
        dcols = (dyt @ wmat).reshape(N, oh * ow, -1)
        dx = self._col2im(dcols, oh, ow)
        self._cols = None
        return dx, [dw.reshape(self.w.shape), db]

    def _col2im(self, dcols, oh, ow):
        N, C, H, W = self._in_shape
        k, stride, p = self.k, self.stride, (self.k - 1) // 2
        dxp = np.zeros((N, C, H + 2 * p, W + 2 * p), dtype=dcols.dtype)
        d6 = dcols.reshape(N, oh, ow, C, k, k)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + oh * stride:stride, j:j + ow * stride:stride] += \
                    d6[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, p:p + H, p:p + W]

    params = property(lambda self: [self.w, self.b])


class ReLU:
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        dx = dy * self._mask
        self._mask = None
        return dx, []

    def out_shape(self, *shape):
        return shape

    params = property(lambda self: [])


class MaxPool2:
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    Gradient routes to the first maximum in window scan order."""

    def forward(self, x):
        N, C, H, W = x.shape
        oh, ow = H // 2, W // 2
        # strided corner views; no window materialization
        c00 = x[:, :, 0:oh * 2:2, 0:ow * 2:2]
        c01 = x[:, :, 0:oh * 2:2, 1:ow * 2:2]
        c10 = x[:, :, 1:oh * 2:2, 0:ow * 2:2]
        c11 = x[:, :, 1:oh * 2:2, 1:ow * 2:2]
        out = np.maximum(np.maximum(c00, c01), np.maximum(c10, c11))
        arg = np.full(out.shape, 3, dtype=np.uint8)
        arg[c10 == out] = 2
        arg[c01 == out] = 1
        arg[c00 == out] = 0
        self._arg = arg
        self._in_shape = x.shape
        return out

    def backward(self, dy):
        N, C, H, W = self._in_shape
        oh, ow = H // 2, W // 2
        dx = np.zeros((N, C, H, W), dtype=dy.dtype)
        arg = self._arg
        dx[:, :, 0:oh * 2:2, 0:ow * 2:2] = dy * (arg == 0)
        dx[:, :, 0:oh * 2:2, 1:ow * 2:2] = dy * (arg == 1)
        dx[:, :, 1:oh * 2:2, 0:ow * 2:2] = dy * (arg == 2)
        dx[:, :, 1:oh * 2:2, 1:ow * 2:2] = dy * (arg == 3)
        self._arg = None
        return dx, []

    def out_shape(self, c, h, w):
        if h < 2 or w < 2:
            raise BadArchitecture(f"pool2 on {h}x{w} input")
        return c, h // 2, w // 2

    params = property(lambda self: [])


class Flatten:
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        dx = dy.reshape(self._shape)
        self._shape = None
        return dx, []

    def out_shape(self, c, h, w):
        return (c * h * w,)

    params = property(lambda self: [])


class Dense:
    def __init__(self, n_in, n_out, dtype):
        self.w = np.zeros((n_out, n_in), dtype=dtype)
        self.b = np.zeros(n_out, dtype=dtype)

    def forward(self, x):
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, dy):
        dw = dy.T @ self._x
        db = dy.sum(axis=0)
        dx = dy @ self.w
        self._x = None
        return dx, [dw, db]

    def out_shape(self, n):
        if n != self.w.shape[1]:
            raise ShapeMismatch(f"dense expects {self.w.shape[1]} inputs, got {n}")
        return (self.w.shape[0],)

    params = property(lambda self: [self.w, self.b])


@dataclass
class PolicyModel:
    arch: tuple
    input_size: int
    layers: list
    seed: int
    dtype: object
    step_count: int = 0
    adam_m: list = dc_field(default_factory=list)
    adam_v: list = dc_field(default_factory=list)

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    def param_count(self):
        return sum(p.size for p in self.params)


def build_layers(arch, input_size, dtype):
    """Parse the descriptor into layer objects, validating shapes as we go."""
    layers, shape = [], (1, input_size, input_size)
    for tok in arch:
        m = _CONV_RE.match(tok)
        if m:
            k1, k2, stride, cout = map(int, m.groups())
            if k1 != k2 or k1 % 2 == 0:
                raise BadArchitecture(f"only odd square kernels supported: {tok}")
            layer = Conv(k1, stride, shape[0], cout, dtype)
        elif tok == "relu":
            layer = ReLU()
        elif tok == "pool2":
            layer = MaxPool2()
        elif tok == "flatten":
            layer = Flatten()
        else:
            m = _DENSE_RE.match(tok)
            if not m:
                raise BadArchitecture(f"unknown layer token: {tok}")
            if len(shape) != 1:
                raise BadArchitecture("dense requires flattened input")
            layer = Dense(shape[0], int(m.group(1)), dtype)
        shape = layer.out_shape(*shape)
        layers.append(layer)
    if len(shape) != 1 or shape[0] != 2:
        raise BadArchitecture(f"final output must be width-2 dense, got {shape}")
    return layers


def init_model(arch=DEFAULT_ARCH, seed=0, input_size=64,
               dtype=np.float32) -> PolicyModel:
    """He-uniform weights, zero biases, zero Adam state; deterministic in seed."""
    layers = build_layers(tuple(arch), input_size, dtype)
    rng = np.random.default_rng(seed)
    for layer in layers:
        if isinstance(layer, Conv):
            fan_in = layer.c_in * layer.k * layer.k
        elif isinstance(layer, Dense):
            fan_in = layer.w.shape[1]
        else:
            continue
        limit = np.sqrt(6.0 / fan_in)
        layer.w[...] = rng.uniform(-limit, limit, size=layer.w.shape)
    model = PolicyModel(arch=tuple(arch), input_size=input_size, layers=layers,
                        seed=seed, dtype=dtype)
    model.adam_m = [np.zeros_like(p) for p in model.params]
    model.adam_v = [np.zeros_like(p) for p in model.params]
    return model


def _as_batch(model, patches):
    x = np.asarray(patches, dtype=model.dtype)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != model.input_size or x.shape[2] != model.input_size:
        raise ShapeMismatch(
            f"expected (*, {model.input_size}, {model.input_size}) patches, got {x.shape}")
    return x[:, None, :, :]


def forward(model: PolicyModel, patch) -> np.ndarray:
    """Single standardized patch -> (du, dv)."""
    return forward_batch(model, np.asarray(patch)[None])[0]


def forward_batch(model: PolicyModel, patches) -> np.ndarray:
    x = _as_batch(model, patches)
    for layer in model.layers:
        x = layer.forward(x)
    return x


def loss_mse(pred, target) -> float:
    """((du - tu)^2 + (dv - tv)^2) / 2."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    return float(((p - t) ** 2).sum(axis=-1).mean() / 2.0)


def backward(model: PolicyModel, patch, target):
    """Gradient of loss_mse at a single sample w.r.t. every parameter."""
    _, grads = backward_batch(model, np.asarray(patch)[None],
                              np.asarray(target)[None])
    return grads


def backward_batch(model: PolicyModel, patches, targets):
    """Mean loss over the batch and matching parameter gradients."""
    x = _as_batch(model, patches)
    t = np.asarray(targets, dtype=model.dtype)
    if t.shape != (x.shape[0], 2):
        raise ShapeMismatch(f"targets must be ({x.shape[0]}, 2), got {t.shape}")
    acts = x
    for layer in model.layers:
        acts = layer.forward(acts)
    loss = loss_mse(acts, t)
    # d(mean loss)/d(pred): (pred - target) / N
    dy = (acts - t) / np.asarray(x.shape[0], dtype=model.dtype)
    grads_rev = []
    for layer in reversed(model.layers):
        dy, g = layer.backward(dy)
        grads_rev.extend(reversed(g))
    return loss, grads_rev[::-1]


def adam_step(model: PolicyModel, grads, lr=1e-3, beta1=0.9, beta2=0.999,
              eps=1e-8) -> None:
    """Standard bias-corrected Adam update; increments the step count."""
    params = model.params
    if len(grads) != len(params):
        raise ShapeMismatch(f"{len(grads)} gradients for {len(params)} parameters")
    model.step_count += 1
    t = model.step_count
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, model.adam_m, model.adam_v):
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} vs parameter {p.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    arch: tuple = DEFAULT_ARCH
    init_seed: int = 0


def train(dataset: PatchDataset, cfg: TrainConfig, model: PolicyModel = None):
    """Mini-batch Adam on the MSE displacement loss.

    Shuffling is driven by cfg.seed, so (dataset, cfg) fully determines the
    final parameters. Patches are standardized per sample at model input.
    Returns (model, per-epoch mean loss).
    """
    if len(dataset) == 0:
        raise EmptyDataset("no samples to train on")
    if model is None:
        model = init_model(arch=cfg.arch, seed=cfg.init_seed,
                           input_size=dataset.patch_size)
    rng = np.random.default_rng(cfg.seed)
    n = len(dataset)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for lo in range(0, n, cfg.batch):
            idx = order[lo:lo + cfg.batch]
            raw = dataset.patches[idx].astype(np.float64)
            mu = raw.mean(axis=(1, 2), keepdims=True)
            sd = np.sqrt(np.maximum(raw.var(axis=(1, 2), keepdims=True), 1e-6))
            batch = ((raw - mu) / sd).astype(model.dtype)
            loss, grads = backward_batch(model, batch, dataset.targets[idx])
            adam_step(model, grads, lr=cfg.lr, beta1=cfg.beta1,
                      beta2=cfg.beta2, eps=cfg.eps)
            total += loss * len(idx)
            seen += len(idx)
        history.append(total / seen)
    return model, history


def predict_displacement(model: PolicyModel, patch) -> np.ndarray:
    """Standardize a raw patch and run the forward pass."""
    return forward(model, standardize_patch(patch).astype(model.dtype))


# --- checkpoint I/O ---------------------------------------------------------

def _tensor_list(model: PolicyModel):
    names = []
    for i, layer in enumerate(model.layers):
        for j, _ in enumerate(layer.params):
            names.append(f"layer{i}.p{j}")
    names += [f"adam_m.{i}" for i in range(len(model.adam_m))]
    names += [f"adam_v.{i}" for i in range(len(model.adam_v))]
    tensors = model.params + model.adam_m + model.adam_v
    return names, tensors


def save_checkpoint(model: PolicyModel, path) -> None:
    names, tensors = _tensor_list(model)
    entries, offset = [], 0
    for name, t in zip(names, tensors):
        nbytes = t.size * 4
        entries.append({"name": name, "shape": list(t.shape), "offset": offset})
        offset += nbytes
    header = {
        "arch": list(model.arch),
        "input_size": model.input_size,
        "seed": model.seed,
        "step_count": model.step_count,
        "tensors": entries,
        "blob_bytes": offset,
    }
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(json.dumps(header, separators=(",", ":"), sort_keys=True).encode() + b"\n")
        for t in tensors:
            f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_checkpoint(path, dtype=np.float32) -> PolicyModel:
    with open(path, "rb") as f:
        magic = f.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise BadMagic(f"not a checkpoint: {magic!r}")
        header = json.loads(f.readline())
        blob = f.read()
    if len(blob) < header["blob_bytes"]:
        raise TruncatedFile(
            f"blob has {len(blob)} bytes, header says {header['blob_bytes']}")
    model = init_model(arch=header["arch"], seed=header["seed"],
                       input_size=header["input_size"], dtype=dtype)
    model.step_count = int(header["step_count"])
    names, tensors = _tensor_list(model)
    entries = header["tensors"]
    if len(entries) != len(tensors):
        raise ShapeMismatch(
            f"checkpoint has {len(entries)} tensors, architecture needs {len(tensors)}")
    if header["blob_bytes"] != sum(t.size * 4 for t in tensors):
        raise ShapeMismatch("header blob_bytes inconsistent with tensor shapes")
    for entry, t in zip(entries, tensors):
        shape = tuple(entry["shape"])
        if shape != t.shape:
            raise ShapeMismatch(f"{entry['name']}: file {shape} vs model {t.shape}")
        off, nbytes = entry["offset"], t.size * 4
        if off + nbytes > len(blob):
            raise TruncatedFile(f"{entry['name']} extends past end of blob")
        t[...] = np.frombuffer(blob[off:off + nbytes], dtype="<f4").reshape(shape)
    return model
