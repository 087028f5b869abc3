"""Train fixture networks and export them with a manifest."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .archs import ArchSpec, parse_arch
from .data import load_image_dataset, synthetic_classes
from .formats import export_model, write_inputs

__all__ = ["ManifestEntry", "train_model", "train_and_export", "export_inputs",
           "write_manifest", "load_manifest"]


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    architecture: str
    accuracy: float
    model_path: str
    dataset: str


def _train(model: nn.Sequential, x: np.ndarray, y: np.ndarray,
           epochs: int, batch: int, lr: float, seed: int) -> float:
    torch.manual_seed(seed)
    xt = torch.from_numpy(x)
    yt = torch.from_numpy(y)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.NLLLoss()
    model.train()
    gen = torch.Generator().manual_seed(seed)
    for _ in range(epochs):
        order = torch.randperm(len(xt), generator=gen)
        for i in range(0, len(xt), batch):
            idx = order[i:i + batch]
            opt.zero_grad()
            probs = model(xt[idx])
            loss = loss_fn(torch.log(probs.clamp_min(1e-12)), yt[idx])
            loss.backward()
            opt.step()
    model.eval()
    with torch.no_grad():
        pred = model(xt).argmax(dim=-1)
        return float((pred == yt).float().mean())


def _reshape_for(arch: ArchSpec, x: np.ndarray) -> np.ndarray:
    if arch.kind == "image":
        h, w, c = arch.input_shape
        return x.reshape(len(x), c, h, w)
    return x


def train_model(spec: str, seed: int, input_dim: int | None = None,
                dataset: str = "auto", data_dir: str | None = None,
                epochs: int | None = None):
    """Build and train one network; returns (arch, model, accuracy, dataset)."""
    arch = parse_arch(spec, input_dim=input_dim)
    torch.manual_seed(seed)
    model = arch.builder()

    if arch.kind == "fixed":
        accuracy = 1.0
        used = "none"
    elif arch.kind == "mlp":
        n_in = arch.input_shape[0]
        x, y = synthetic_classes(n_in, 4000, seed=seed)
        accuracy = _train(model, x, y, epochs=epochs or 60, batch=256,
                          lr=1e-2, seed=seed)
        used = f"synthetic-{n_in}d"
    else:
        kwargs = {} if data_dir is None else {"data_dir": data_dir}
        (x, y), _ = load_image_dataset(dataset, **kwargs)
        x = _reshape_for(arch, x.astype(np.float32))
        accuracy = _train(model, x, y, epochs=epochs or 3, batch=128,
                          lr=1e-3, seed=seed)
        used = dataset
    return arch, model.eval(), accuracy, used


def train_and_export(spec: str, seed: int, out_path, input_dim: int | None = None,
                     dataset: str = "auto", data_dir: str | None = None,
                     epochs: int | None = None) -> ManifestEntry:
    """Train (or, for fixed specs, just build) one network and write it to
    the interchange format. Returns the manifest entry."""
    arch, model, accuracy, used = train_model(spec, seed, input_dim=input_dim,
                                              dataset=dataset, data_dir=data_dir,
                                              epochs=epochs)
    export_model(model, arch.input_shape, out_path,
                 metadata={"name": arch.name, "seed": seed,
                           "accuracy": round(accuracy, 4), "dataset": used})
    return ManifestEntry(name=arch.name, architecture=spec, accuracy=accuracy,
                         model_path=str(out_path), dataset=used)


def export_inputs(dataset: str, count: int, out_path,
                  data_dir: str | None = None) -> str:
    """Write `count` flattened test inputs with oracle labels."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        write_inputs(np.empty((0, 0)), [], out_path)
        return str(out_path)
    kwargs = {} if data_dir is None else {"data_dir": data_dir}
    _, (x, y) = load_image_dataset(dataset, **kwargs)
    write_inputs(x[:count], y[:count], out_path)
    return str(out_path)


def write_manifest(entries: list[ManifestEntry], path) -> None:
    Path(path).write_text(json.dumps([asdict(e) for e in entries], indent=2))


def load_manifest(path) -> list[ManifestEntry]:
    return [ManifestEntry(**doc) for doc in json.loads(Path(path).read_text())]
