"""Architecture string parsing and torch model construction.

Recognized specs:

    relu:LxW / tanh:LxW   MLP with L hidden layers of W units (default 2
                          inputs, 2 outputs; input dimension overridable)
    mnist-small-conv      28x28x1 conv net: 3x3x16 conv, relu, 2x2 pool,
                          dense 10, softmax
    dnn-1 .. dnn-6        MNIST classifier family from shallow to deep,
                          at reduced filter counts (8/16/32)
    dense:identity        hand-set 2x2 identity + softmax, no training
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import torch
from torch import nn

from .formats import ExportError

IMAGE_SHAPE = (28, 28, 1)


@dataclass(frozen=True)
class ArchSpec:
    name: str
    kind: str                      # "mlp", "image", "fixed"
    input_shape: tuple[int, ...]
    n_outputs: int
    builder: object                # () -> nn.Sequential


def _mlp(n_in: int, hidden: list[int], act: type, n_out: int) -> nn.Sequential:
    mods: list[nn.Module] = []
    prev = n_in
    for width in hidden:
        mods += [nn.Linear(prev, width), act()]
        prev = width
    mods += [nn.Linear(prev, n_out), nn.Softmax(dim=-1)]
    return nn.Sequential(*mods)


def _identity_net() -> nn.Sequential:
    lin = nn.Linear(2, 2)
    with torch.no_grad():
        lin.weight.copy_(torch.eye(2))
        lin.bias.zero_()
    return nn.Sequential(lin, nn.Softmax(dim=-1))


def _small_conv() -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(1, 16, 3), nn.ReLU(), nn.MaxPool2d(2, 2),
        nn.Flatten(), nn.Linear(13 * 13 * 16, 10), nn.Softmax(dim=-1))


def _dnn(depth: int) -> nn.Sequential:
    """Reduced members of the six-network MNIST family: dense-only at the
    shallow end, growing conv stacks (8/16/32 filters) toward the deep end."""
    if depth == 1:
        return nn.Sequential(nn.Flatten(), nn.Linear(784, 64), nn.ReLU(),
                             nn.Linear(64, 10), nn.Softmax(dim=-1))
    if depth == 2:
        return nn.Sequential(
            nn.Conv2d(1, 8, 3), nn.ReLU(), nn.MaxPool2d(2, 2),
            nn.Flatten(), nn.Linear(13 * 13 * 8, 10), nn.Softmax(dim=-1))
    if depth == 3:
        return nn.Sequential(
            nn.Conv2d(1, 8, 3), nn.ReLU(),
            nn.Conv2d(8, 16, 3), nn.ReLU(), nn.MaxPool2d(2, 2),
            nn.Flatten(), nn.Linear(12 * 12 * 16, 10), nn.Softmax(dim=-1))
    if depth == 4:
        return nn.Sequential(
            nn.Conv2d(1, 8, 3), nn.BatchNorm2d(8), nn.ReLU(), nn.MaxPool2d(2, 2),
            nn.Conv2d(8, 16, 3), nn.ReLU(), nn.MaxPool2d(2, 2),
            nn.Flatten(), nn.Linear(5 * 5 * 16, 32), nn.ReLU(),
            nn.Dropout(0.5), nn.Linear(32, 10), nn.Softmax(dim=-1))
    if depth == 5:
        return nn.Sequential(
            nn.Conv2d(1, 8, 3), nn.ReLU(),
            nn.Conv2d(8, 16, 3), nn.BatchNorm2d(16), nn.ReLU(),
            nn.MaxPool2d(2, 2),
            nn.Conv2d(16, 32, 3), nn.ReLU(),
            nn.Flatten(), nn.Linear(10 * 10 * 32, 64), nn.ReLU(),
            nn.Dropout(0.5), nn.Linear(64, 10), nn.Softmax(dim=-1))
    if depth == 6:
        return nn.Sequential(
            nn.Conv2d(1, 8, 3), nn.ReLU(), nn.MaxPool2d(2, 2),
            nn.Conv2d(8, 16, 3), nn.BatchNorm2d(16), nn.ReLU(),
            nn.MaxPool2d(2, 2),
            nn.Conv2d(16, 32, 3), nn.ReLU(),
            nn.Flatten(), nn.Linear(3 * 3 * 32, 64), nn.ReLU(),
            nn.Dropout(0.5), nn.Linear(64, 10), nn.Softmax(dim=-1))
    raise ExportError(f"unknown family member dnn-{depth}")


def parse_arch(spec: str, input_dim: int | None = None) -> ArchSpec:
    m = re.fullmatch(r"(relu|tanh):(\d+)x(\d+)", spec)
    if m:
        act = nn.ReLU if m.group(1) == "relu" else nn.Tanh
        layers, width = int(m.group(2)), int(m.group(3))
        n_in = input_dim if input_dim is not None else 2
        if layers < 1 or width < 1 or n_in < 1:
            raise ExportError(f"degenerate architecture {spec!r}")
        return ArchSpec(name=spec, kind="mlp", input_shape=(n_in,), n_outputs=2,
                        builder=lambda: _mlp(n_in, [width] * layers, act, 2))
    if spec == "mnist-small-conv":
        return ArchSpec(name=spec, kind="image", input_shape=IMAGE_SHAPE,
                        n_outputs=10, builder=_small_conv)
    m = re.fullmatch(r"dnn-([1-6])", spec)
    if m:
        depth = int(m.group(1))
        return ArchSpec(name=spec, kind="image", input_shape=IMAGE_SHAPE,
                        n_outputs=10, builder=lambda: _dnn(depth))
    if spec == "dense:identity":
        return ArchSpec(name=spec, kind="fixed", input_shape=(2,), n_outputs=2,
                        builder=_identity_net)
    raise ExportError(f"unknown architecture spec {spec!r}")
