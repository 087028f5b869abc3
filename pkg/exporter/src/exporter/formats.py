"""Serialize torch modules to the model interchange JSON format.

The quantifier consumes models only through its documented JSON schema (see
docs/model-format.md in the main package), so this module emits that schema
directly and never imports the quantifier.

Layout note: the interchange format evaluates images in HWC order (channels
last) and flattens in that order, while torch uses CHW. Dense layers that
follow a convolutional stack therefore get their input columns permuted from
(c, h, w) to (h, w, c) during export.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

FORMAT_VERSION = "1.0"


class ExportError(ValueError):
    """Module graph cannot be expressed in the interchange format."""


def _payload(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return {"shape": list(arr.shape),
            "data": base64.b64encode(data).decode("ascii")}


def _chw_to_hwc_columns(weight: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    """Reorder dense input columns from torch's (c,h,w) flatten order to the
    interchange (h,w,c) order."""
    cols = weight.reshape(weight.shape[0], c, h, w)
    return cols.transpose(0, 2, 3, 1).reshape(weight.shape[0], c * h * w)


def module_to_layers(model: nn.Sequential, input_shape: tuple[int, ...]) -> list[dict]:
    """Walk a sequential torch model and emit interchange layer specs."""
    layers: list[dict] = []
    # shape is (h, w, c) for spatial tensors, (n,) after flattening; None
    # marks "flat from the start" (no permutation ever needed).
    shape: tuple[int, ...] | None = tuple(input_shape)
    flattened_from: tuple[int, int, int] | None = None

    for idx, mod in enumerate(model):
        if isinstance(mod, nn.Linear):
            weight = mod.weight.detach().cpu().numpy()
            bias = mod.bias.detach().cpu().numpy()
            if flattened_from is not None:
                h, w, c = flattened_from
                weight = _chw_to_hwc_columns(weight, c, h, w)
                flattened_from = None
            layers.append({"kind": "dense", "weights": _payload(weight),
                           "bias": _payload(bias)})
            shape = (weight.shape[0],)
        elif isinstance(mod, nn.Conv2d):
            if mod.padding not in ((0, 0), 0, "valid"):
                raise ExportError(f"module {idx}: only valid padding is supported")
            filt = mod.weight.detach().cpu().numpy()  # (c_out, c_in, kh, kw)
            filt = filt.transpose(2, 3, 1, 0)          # -> (kh, kw, c_in, c_out)
            bias = mod.bias.detach().cpu().numpy()
            stride = mod.stride[0] if isinstance(mod.stride, tuple) else mod.stride
            layers.append({"kind": "conv2d", "filters": _payload(filt),
                           "bias": _payload(bias), "stride": int(stride),
                           "padding": "valid"})
            h, w, _ = shape
            kh, kw = filt.shape[0], filt.shape[1]
            shape = ((h - kh) // stride + 1, (w - kw) // stride + 1,
                     filt.shape[3])
        elif isinstance(mod, nn.MaxPool2d):
            window = mod.kernel_size if isinstance(mod.kernel_size, int) \
                else mod.kernel_size[0]
            stride = mod.stride if isinstance(mod.stride, int) else mod.stride[0]
            layers.append({"kind": "maxpool", "window": int(window),
                           "stride": int(stride)})
            h, w, c = shape
            shape = ((h - window) // stride + 1, (w - window) // stride + 1, c)
        elif isinstance(mod, nn.BatchNorm2d):
            layers.append({"kind": "batchnorm",
                           "mean": _payload(mod.running_mean.detach().cpu().numpy()),
                           "variance": _payload(mod.running_var.detach().cpu().numpy()),
                           "gamma": _payload(mod.weight.detach().cpu().numpy()),
                           "beta": _payload(mod.bias.detach().cpu().numpy()),
                           "epsilon": float(mod.eps)})
        elif isinstance(mod, nn.Flatten):
            layers.append({"kind": "flatten"})
            if len(shape) == 3:
                flattened_from = shape  # remember (h, w, c) for the next Linear
                shape = (int(np.prod(shape)),)
        elif isinstance(mod, nn.ReLU):
            layers.append({"kind": "relu"})
        elif isinstance(mod, nn.Tanh):
            layers.append({"kind": "tanh"})
        elif isinstance(mod, nn.Sigmoid):
            layers.append({"kind": "sigmoid"})
        elif isinstance(mod, nn.Softmax):
            layers.append({"kind": "softmax"})
        elif isinstance(mod, nn.Dropout):
            layers.append({"kind": "dropout", "rate": float(mod.p)})
        else:
            raise ExportError(f"module {idx}: unsupported type {type(mod).__name__}")
    return layers


def export_model(model: nn.Sequential, input_shape: tuple[int, ...], path,
                 metadata: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(input_shape),
        "metadata": metadata or {},
        "layers": module_to_layers(model, input_shape),
    }
    Path(path).write_text(json.dumps(doc))


def write_inputs(inputs: np.ndarray, labels, path) -> None:
    """Write flattened normalized inputs with integer oracle labels."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.size and (inputs.min() < 0.0 or inputs.max() > 1.0):
        raise ExportError("inputs must be normalized to [0,1]")
    Path(path).write_text(json.dumps({
        "inputs": [[float(v) for v in row] for row in inputs],
        "labels": [int(v) for v in labels],
    }))
