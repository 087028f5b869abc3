"""Command-line entry points: train-export and export-inputs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import DatasetMissingError
from .formats import ExportError
from .train import (export_inputs, load_manifest, train_and_export,
                    write_manifest)


def run_train(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="train-export",
        description="Train a fixture network and export it to the model "
                    "interchange format")
    parser.add_argument("spec", help='architecture, e.g. "relu:1x100", '
                                     '"tanh:6x250", "mnist-small-conv", "dnn-3"')
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="model JSON output path")
    parser.add_argument("--manifest", help="manifest JSON to create or extend")
    parser.add_argument("--input-dim", type=int,
                        help="override MLP input dimension (default 2)")
    parser.add_argument("--dataset", default="auto",
                        help="image dataset: mnist, digits, or auto")
    parser.add_argument("--data-dir", help="local dataset directory")
    parser.add_argument("--epochs", type=int, help="override training epochs")
    args = parser.parse_args(argv)
    try:
        entry = train_and_export(args.spec, args.seed, args.out,
                                 input_dim=args.input_dim, dataset=args.dataset,
                                 data_dir=args.data_dir, epochs=args.epochs)
    except (ExportError, DatasetMissingError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(f"{entry.name}: accuracy {entry.accuracy:.4f} -> {entry.model_path}")
    if args.manifest:
        entries = (load_manifest(args.manifest)
                   if Path(args.manifest).exists() else [])
        write_manifest(entries + [entry], args.manifest)
    return 0


def run_inputs(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export-inputs",
        description="Export flattened normalized test inputs with oracle labels")
    parser.add_argument("dataset", help="mnist, digits, or auto")
    parser.add_argument("--count", type=int, default=10)
    parser.add_argument("--out", required=True)
    parser.add_argument("--data-dir", help="local dataset directory")
    args = parser.parse_args(argv)
    try:
        path = export_inputs(args.dataset, args.count, args.out,
                             data_dir=args.data_dir)
    except (DatasetMissingError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(f"wrote {args.count} inputs to {path}")
    return 0


def main_train() -> None:
    sys.exit(run_train())


def main_inputs() -> None:
    sys.exit(run_inputs())
