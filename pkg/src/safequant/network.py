"""Feedforward network inference on batches of inputs.

The network is treated as an opaque map from flat input vectors in [0,1]^n to
probability (or logit) vectors of length m.  Everything runs in float64; there
is no autodiff and no training machinery here.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ShapeError",
    "InputError",
    "Batch",
    "Layer",
    "Dense",
    "Conv2D",
    "MaxPool",
    "Flatten",
    "ReLU",
    "Tanh",
    "Sigmoid",
    "Softmax",
    "BatchNormFolded",
    "Identity",
    "QueryMeter",
    "Network",
    "forward",
    "forward_single",
]


class ShapeError(ValueError):
    """Layer shapes are inconsistent; message names the offending layer."""


class InputError(ValueError):
    """Input vector is malformed (wrong length or non-finite entries)."""


@dataclass(frozen=True)
class Batch:
    """A stack of flat input vectors, all of the same dimension."""

    points: np.ndarray  # (count, n)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise InputError("batch must be a 2-D array of row vectors")
        if pts.shape[0] < 1:
            raise InputError("batch must contain at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]


class Layer:
    """Base class: knows its output shape and how to apply itself to a batch.

    Batches are arrays shaped (count, *in_shape).
    """

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def kind(self) -> str:
        return type(self).__name__.lower()


@dataclass(frozen=True)
class Dense(Layer):
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise ShapeError(
                f"dense: weights {w.shape} incompatible with bias {b.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    def out_shape(self, in_shape):
        n_in = int(np.prod(in_shape))
        if n_in != self.weights.shape[1]:
            raise ShapeError(
                f"dense: expected input size {self.weights.shape[1]}, got {n_in}")
        return (self.weights.shape[0],)

    def apply(self, x):
        flat = x.reshape(x.shape[0], -1)
        # einsum (unlike BLAS matmul) reduces each output element in a fixed
        # order, keeping batched results bit-identical to single-row results.
        return np.einsum("bi,oi->bo", flat, self.weights) + self.bias


@dataclass(frozen=True)
class Conv2D(Layer):
    filters: np.ndarray  # (kh, kw, c_in, c_out)
    bias: np.ndarray     # (c_out,)
    stride: int = 1
    padding: str = "valid"  # "valid" or "same"

    def __post_init__(self):
        f = np.asarray(self.filters, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if f.ndim != 4 or b.shape != (f.shape[3],):
            raise ShapeError(
                f"conv2d: filters {f.shape} incompatible with bias {b.shape}")
        if self.padding not in ("valid", "same"):
            raise ShapeError(f"conv2d: unknown padding {self.padding!r}")
        if self.stride < 1:
            raise ShapeError("conv2d: stride must be >= 1")
        object.__setattr__(self, "filters", f)
        object.__setattr__(self, "bias", b)

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"conv2d: expected HxWxC input, got shape {in_shape}")
        h, w, c = in_shape
        kh, kw, c_in, c_out = self.filters.shape
        if c != c_in:
            raise ShapeError(f"conv2d: expected {c_in} input channels, got {c}")
        if self.padding == "same":
            oh = math.ceil(h / self.stride)
            ow = math.ceil(w / self.stride)
        else:
            if h < kh or w < kw:
                raise ShapeError(f"conv2d: input {h}x{w} smaller than kernel {kh}x{kw}")
            oh = (h - kh) // self.stride + 1
            ow = (w - kw) // self.stride + 1
        return (oh, ow, c_out)

    def apply(self, x):
        k, h, w, _ = x.shape
        kh, kw, c_in, c_out = self.filters.shape
        oh, ow, _ = self.out_shape(x.shape[1:])
        if self.padding == "same":
            pad_h = max((oh - 1) * self.stride + kh - h, 0)
            pad_w = max((ow - 1) * self.stride + kw - w, 0)
            x = np.pad(x, ((0, 0),
                           (pad_h // 2, pad_h - pad_h // 2),
                           (pad_w // 2, pad_w - pad_w // 2),
                           (0, 0)))
        out = np.zeros((k, oh, ow, c_out))
        for i in range(kh):
            for j in range(kw):
                patch = x[:, i:i + self.stride * oh:self.stride,
                          j:j + self.stride * ow:self.stride, :]
                out += np.einsum("bhwc,cd->bhwd", patch, self.filters[i, j])
        return out + self.bias


@dataclass(frozen=True)
class MaxPool(Layer):
    window: int
    stride: int

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"maxpool: expected HxWxC input, got shape {in_shape}")
        h, w, c = in_shape
        if h < self.window or w < self.window:
            raise ShapeError(f"maxpool: input {h}x{w} smaller than window {self.window}")
        oh = (h - self.window) // self.stride + 1
        ow = (w - self.window) // self.stride + 1
        return (oh, ow, c)

    def apply(self, x):
        oh, ow, c = self.out_shape(x.shape[1:])
        out = np.full((x.shape[0], oh, ow, c), -np.inf)
        for i in range(self.window):
            for j in range(self.window):
                patch = x[:, i:i + self.stride * oh:self.stride,
                          j:j + self.stride * ow:self.stride, :]
                np.maximum(out, patch, out=out)
        return out


class Flatten(Layer):
    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def apply(self, x):
        return x.reshape(x.shape[0], -1)


class ReLU(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def apply(self, x):
        return np.maximum(x, 0.0)


class Tanh(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def apply(self, x):
        return np.tanh(x)


class Sigmoid(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def apply(self, x):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out


class Softmax(Layer):
    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError(f"softmax: expected flat input, got shape {in_shape}")
        return in_shape

    def apply(self, x):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class BatchNormFolded(Layer):
    """Inference-time batch norm reduced to elementwise scale and shift.

    scale/shift broadcast over the trailing (channel or feature) axis.
    """

    scale: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scale, dtype=np.float64)
        t = np.asarray(self.shift, dtype=np.float64)
        if s.shape != t.shape:
            raise ShapeError(f"batchnorm: scale {s.shape} != shift {t.shape}")
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "shift", t)

    def out_shape(self, in_shape):
        if in_shape[-1] != self.scale.shape[0]:
            raise ShapeError(
                f"batchnorm: expected trailing dim {self.scale.shape[0]}, "
                f"got {in_shape[-1]}")
        return in_shape

    def apply(self, x):
        return x * self.scale + self.shift


class Identity(Layer):
    """Stand-in for inference no-ops (e.g. dropout folded away at load)."""

    def out_shape(self, in_shape):
        return in_shape

    def apply(self, x):
        return x


@dataclass
class QueryMeter:
    """Thread-safe forward-call accounting: points evaluated and batches issued."""

    queries: int = 0
    batches: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, count: int) -> None:
        with self._lock:
            self.queries += count
            self.batches += 1


class Network:
    """Immutable layered feedforward model with batched evaluation.

    Construction validates that consecutive layer shapes are compatible; a
    mismatch raises ShapeError naming the layer index.
    """

    def __init__(self, layers: list[Layer], input_shape: tuple[int, ...] | int):
        if isinstance(input_shape, int):
            input_shape = (input_shape,)
        self.layers = tuple(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.input_dim = int(np.prod(self.input_shape))
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.out_shape(shape)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
        if len(shape) != 1:
            raise ShapeError(f"final layer output shape {shape} is not a vector")
        self.output_dim = shape[0]
        self.meter = QueryMeter()

    @property
    def has_softmax_output(self) -> bool:
        return bool(self.layers) and isinstance(self.layers[-1], Softmax)

    def forward(self, batch) -> np.ndarray:
        """Evaluate a batch of flat input vectors; returns (count, m) outputs.

        Counts batch.count queries and one batch on the meter.
        """
        if isinstance(batch, Batch):
            batch = batch.points
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise InputError(
                f"expected batch of vectors with dimension {self.input_dim}, "
                f"got array of shape {x.shape}")
        if x.shape[0] < 1:
            raise InputError("batch must contain at least one point")
        if not np.all(np.isfinite(x)):
            raise InputError("input contains non-finite coordinates")
        out = x.reshape((x.shape[0],) + self.input_shape)
        for i, layer in enumerate(self.layers):
            try:
                out = layer.apply(out)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
        self.meter.record(x.shape[0])
        return out

    def forward_single(self, x) -> np.ndarray:
        return self.forward(np.asarray(x, dtype=np.float64)[None, :])[0]


def forward(net: Network, batch) -> np.ndarray:
    return net.forward(batch)


def forward_single(net: Network, x) -> np.ndarray:
    return net.forward_single(x)
