"""Training and evaluation datasets.

Low-dimensional MLPs train on a synthetic smooth two-class labelling of the
unit hypercube. Image classifiers prefer real MNIST when a local copy
exists; otherwise the 8x8 handwritten-digits set ships with scikit-learn and
is upsampled to 28x28 so the image architectures keep their declared input
shape.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

DEFAULT_DATA_DIR = os.environ.get("EXPORTER_DATA_DIR", "data")


class DatasetMissingError(RuntimeError):
    """Requested dataset is not available locally; message says how to get it."""


def synthetic_classes(n_dim: int, count: int, seed: int):
    """Two-class labelling of [0,1]^n by the sign of a fixed smooth field."""
    rng = np.random.default_rng(seed)
    freq = rng.normal(scale=3.0, size=n_dim)
    phase = rng.uniform(0, 2 * np.pi)
    x = rng.uniform(size=(count, n_dim))
    field = np.sin(x @ freq + phase) + 0.5 * np.cos(2.0 * x.sum(axis=1))
    y = (field > 0).astype(np.int64)
    return x.astype(np.float32), y


def load_mnist(data_dir: str = DEFAULT_DATA_DIR):
    """Real MNIST from a local torchvision cache; never downloads."""
    try:
        from torchvision import datasets  # noqa: PLC0415
    except ImportError:
        raise DatasetMissingError(
            "torchvision is required for MNIST; install it or use the "
            "'digits' dataset") from None
    try:
        train = datasets.MNIST(data_dir, train=True, download=False)
        test = datasets.MNIST(data_dir, train=False, download=False)
    except RuntimeError:
        raise DatasetMissingError(
            f"MNIST not found under {data_dir!r}; download it with "
            "torchvision.datasets.MNIST(root, download=True) on a machine "
            "with internet access, or use the 'digits' dataset") from None

    def unpack(ds):
        x = ds.data.numpy().astype(np.float32) / 255.0
        return x.reshape(len(ds), -1), ds.targets.numpy().astype(np.int64)

    return unpack(train), unpack(test)


def load_digits28():
    """Scikit-learn 8x8 digits upsampled to 28x28, split 5:1."""
    from scipy.ndimage import zoom  # noqa: PLC0415
    from sklearn.datasets import load_digits  # noqa: PLC0415

    raw = load_digits()
    imgs = raw.images.astype(np.float32) / 16.0
    big = zoom(imgs, (1, 3.5, 3.5), order=1)
    big = np.clip(big, 0.0, 1.0).reshape(len(imgs), -1)
    labels = raw.target.astype(np.int64)
    split = len(imgs) * 5 // 6
    return (big[:split], labels[:split]), (big[split:], labels[split:])


def load_image_dataset(name: str = "auto", data_dir: str = DEFAULT_DATA_DIR):
    """Resolve an image dataset by name: 'mnist', 'digits', or 'auto'
    (mnist when locally available, digits otherwise)."""
    if name == "mnist":
        return load_mnist(data_dir)
    if name == "digits":
        return load_digits28()
    if name == "auto":
        try:
            return load_mnist(data_dir)
        except DatasetMissingError:
            return load_digits28()
    raise DatasetMissingError(f"unknown dataset {name!r}; use mnist or digits")
