"""Fixture-network trainer and exporter for the model interchange format."""

from .archs import ArchSpec, parse_arch
from .data import DatasetMissingError, load_image_dataset, synthetic_classes
from .formats import ExportError, export_model, module_to_layers, write_inputs
from .train import (ManifestEntry, export_inputs, load_manifest, train_model,
                    train_and_export, write_manifest)

__version__ = "0.1.0"
