"""Load/save networks, run configurations, and quantification reports.

Model interchange format: one JSON document, weights as base64-encoded
little-endian float32 arrays with explicit shapes (promoted to float64 on
load).  See docs/model-format.md and docs/report-format.md for the schemas.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .network import (BatchNormFolded, Conv2D, Dense, Flatten, Identity, Layer,
                      MaxPool, Network, ReLU, ShapeError, Sigmoid, Softmax, Tanh)
from .properties import (ConfidenceInterval, PropertyExpr, Reachability,
                         UncertaintyReference, UncertaintyUniform)
from .quantify import NormBall, QuantReport, RiskWitness

__all__ = [
    "ModelFormatError",
    "ReportFormatError",
    "RunConfigError",
    "MODEL_FORMAT_VERSION",
    "REPORT_FORMAT_VERSION",
    "load_model",
    "save_model",
    "RunConfig",
    "load_config",
    "save_report",
    "load_report",
]

MODEL_FORMAT_VERSION = "1.0"
REPORT_FORMAT_VERSION = "1.0"


class ModelFormatError(ValueError):
    """Model file failed validation; message names the offending layer/field."""


class ReportFormatError(ValueError):
    """Report document failed validation."""


class RunConfigError(ValueError):
    """Run configuration failed validation; message names the field."""


def _decode_array(payload: dict, shape_key: str, where: str) -> np.ndarray:
    try:
        shape = tuple(int(d) for d in payload["shape"])
        raw = base64.b64decode(payload["data"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{where}: malformed weight payload ({exc})") from None
    arr = np.frombuffer(raw, dtype="<f4")
    if arr.size != int(np.prod(shape)):
        raise ModelFormatError(
            f"{where}: payload has {arr.size} values, shape {shape} needs "
            f"{int(np.prod(shape))}")
    return arr.astype(np.float64).reshape(shape)


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return {"shape": list(arr.shape),
            "data": base64.b64encode(data).decode("ascii")}


def _fold_batchnorm(spec: dict, where: str) -> BatchNormFolded:
    for key in ("mean", "variance", "gamma", "beta"):
        if key not in spec:
            raise ModelFormatError(f"{where}: batchnorm missing field {key!r}")
    mean = _decode_array(spec["mean"], "shape", f"{where}.mean")
    var = _decode_array(spec["variance"], "shape", f"{where}.variance")
    gamma = _decode_array(spec["gamma"], "shape", f"{where}.gamma")
    beta = _decode_array(spec["beta"], "shape", f"{where}.beta")
    eps = float(spec.get("epsilon", 1e-3))
    scale = gamma / np.sqrt(var + eps)
    shift = beta - mean * scale
    return BatchNormFolded(scale=scale, shift=shift)


def _layer_from_spec(spec: dict, index: int) -> Layer:
    where = f"layer {index}"
    kind = spec.get("kind")
    try:
        if kind == "dense":
            return Dense(weights=_decode_array(spec["weights"], "shape",
                                               f"{where}.weights"),
                         bias=_decode_array(spec["bias"], "shape", f"{where}.bias"))
        if kind == "conv2d":
            return Conv2D(filters=_decode_array(spec["filters"], "shape",
                                                f"{where}.filters"),
                          bias=_decode_array(spec["bias"], "shape", f"{where}.bias"),
                          stride=int(spec.get("stride", 1)),
                          padding=spec.get("padding", "valid"))
        if kind == "maxpool":
            return MaxPool(window=int(spec["window"]), stride=int(spec["stride"]))
        if kind == "flatten":
            return Flatten()
        if kind == "relu":
            return ReLU()
        if kind == "tanh":
            return Tanh()
        if kind == "sigmoid":
            return Sigmoid()
        if kind == "softmax":
            return Softmax()
        if kind == "batchnorm":
            return _fold_batchnorm(spec, where)
        if kind == "batchnorm_folded":
            return BatchNormFolded(
                scale=_decode_array(spec["scale"], "shape", f"{where}.scale"),
                shift=_decode_array(spec["shift"], "shape", f"{where}.shift"))
        if kind == "dropout":
            return Identity()  # inference no-op
    except KeyError as exc:
        raise ModelFormatError(f"{where} ({kind}): missing field {exc}") from None
    except ShapeError as exc:
        raise ModelFormatError(f"{where} ({kind}): {exc}") from None
    raise ModelFormatError(f"{where}: unsupported layer kind {kind!r}")


def _weights_digest(doc: dict) -> str:
    h = hashlib.sha256()
    for i, spec in enumerate(doc.get("layers", [])):
        for key in sorted(spec):
            val = spec[key]
            if isinstance(val, dict) and "data" in val:
                h.update(f"{i}:{key}:".encode())
                h.update(str(val["data"]).encode())
    return h.hexdigest()


def load_model(path) -> Network:
    """Load and validate a model file; the weights digest is attached to the
    network for report provenance."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from None
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {version!r}, expected {MODEL_FORMAT_VERSION}")
    if "input_shape" not in doc or "layers" not in doc:
        raise ModelFormatError("model file missing input_shape or layers")
    input_shape = tuple(int(d) for d in doc["input_shape"])
    layers = [_layer_from_spec(spec, i) for i, spec in enumerate(doc["layers"])]
    try:
        net = Network(layers, input_shape)
    except ShapeError as exc:
        raise ModelFormatError(str(exc)) from None
    net.digest = _weights_digest(doc)
    net.metadata = doc.get("metadata", {})
    return net


def _layer_to_spec(layer: Layer) -> dict:
    if isinstance(layer, Dense):
        return {"kind": "dense", "weights": _encode_array(layer.weights),
                "bias": _encode_array(layer.bias)}
    if isinstance(layer, Conv2D):
        return {"kind": "conv2d", "filters": _encode_array(layer.filters),
                "bias": _encode_array(layer.bias), "stride": layer.stride,
                "padding": layer.padding}
    if isinstance(layer, MaxPool):
        return {"kind": "maxpool", "window": layer.window, "stride": layer.stride}
    if isinstance(layer, BatchNormFolded):
        return {"kind": "batchnorm_folded", "scale": _encode_array(layer.scale),
                "shift": _encode_array(layer.shift)}
    simple = {Flatten: "flatten", ReLU: "relu", Tanh: "tanh",
              Sigmoid: "sigmoid", Softmax: "softmax", Identity: "dropout"}
    for cls, kind in simple.items():
        if isinstance(layer, cls):
            return {"kind": kind}
    raise ModelFormatError(f"cannot serialize layer kind {layer.kind!r}")


def save_model(net: Network, path, metadata: dict | None = None) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "input_shape": list(net.input_shape),
        "metadata": metadata or getattr(net, "metadata", {}),
        "layers": [_layer_to_spec(layer) for layer in net.layers],
    }
    Path(path).write_text(json.dumps(doc))


_P_VALUES = {"1": 1.0, "2": 2.0, "inf": np.inf, 1: 1.0, 2: 2.0}


def parse_p(value) -> float:
    if isinstance(value, float) and (value in (1.0, 2.0) or math.isinf(value)):
        return np.inf if math.isinf(value) else value
    if value in _P_VALUES:
        return _P_VALUES[value]
    raise RunConfigError("p must be 1, 2, or inf")


def _p_to_json(p: float):
    return "inf" if math.isinf(p) else int(p)


@dataclass(frozen=True)
class RunConfig:
    model_path: str
    property_spec: dict[str, Any]
    d: float
    p: float
    center: Optional[np.ndarray] = None
    input_index: Optional[int] = None
    inputs_path: Optional[str] = None
    budget: int = 20_000
    seed: int = 0
    out_path: Optional[str] = None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RunConfigError(f"cannot read config file {path}: {exc}") from None
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> RunConfig:
    if "model" not in doc:
        raise RunConfigError("config field 'model' is required")
    d = float(doc.get("d", 0.0))
    if d <= 0:
        raise RunConfigError("config field 'd' must be > 0")
    p = parse_p(doc.get("p", "inf"))
    budget = int(doc.get("budget", 20_000))
    if budget < 1:
        raise RunConfigError("config field 'budget' must be >= 1")
    center = doc.get("center")
    if center is not None:
        center = np.asarray(center, dtype=np.float64)
        if np.any(center < 0) or np.any(center > 1):
            raise RunConfigError("config field 'center' must lie in [0,1]^n")
    prop = doc.get("property", {})
    if not isinstance(prop, dict):
        raise RunConfigError("config field 'property' must be an object")
    return RunConfig(model_path=doc["model"], property_spec=prop, d=d, p=p,
                     center=center, input_index=doc.get("input_index"),
                     inputs_path=doc.get("inputs"), budget=budget,
                     seed=int(doc.get("seed", 0)), out_path=doc.get("out"))


def _property_to_json(expr: PropertyExpr) -> dict:
    if isinstance(expr, ConfidenceInterval):
        return {"kind": "confidence_interval", "l1": expr.l1, "l2": expr.l2,
                "epsilon": expr.epsilon}
    if isinstance(expr, UncertaintyUniform):
        return {"kind": "uncertainty_uniform", "epsilon": expr.epsilon}
    if isinstance(expr, UncertaintyReference):
        return {"kind": "uncertainty_reference", "epsilon": expr.epsilon,
                "reference": [float(v) for v in expr.reference]}
    if isinstance(expr, Reachability):
        return {"kind": "reachability", "label": expr.label,
                "epsilon": expr.epsilon}
    raise ReportFormatError(f"unknown property type {type(expr).__name__}")


def property_from_json(doc: dict) -> PropertyExpr:
    kind = doc.get("kind")
    if kind == "confidence_interval":
        return ConfidenceInterval(l1=int(doc["l1"]), l2=int(doc["l2"]),
                                  epsilon=float(doc.get("epsilon", 0.0)))
    if kind == "uncertainty_uniform":
        return UncertaintyUniform(epsilon=float(doc["epsilon"]))
    if kind == "uncertainty_reference":
        return UncertaintyReference(reference=np.asarray(doc["reference"]),
                                    epsilon=float(doc["epsilon"]))
    if kind == "reachability":
        return Reachability(label=int(doc["label"]), epsilon=float(doc["epsilon"]))
    raise ReportFormatError(f"unknown property kind {kind!r}")


def _vector_to_b64(v: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(v, dtype="<f8").tobytes()).decode("ascii")


def _vector_from_b64(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8").copy()


def report_to_dict(report: QuantReport) -> dict:
    doc = {
        "format_version": REPORT_FORMAT_VERSION,
        "property": _property_to_json(report.property),
        "ball": {"center": _vector_to_b64(report.ball.center),
                 "d": report.ball.radius, "p": _p_to_json(report.ball.p)},
        "Q_estimate": report.Q_estimate,
        "witness": _vector_to_b64(np.asarray(report.witness)),
        "s_at_x": report.s_at_x,
        "d_prime": report.safe_radius,
        "clamped": report.radius_clamped,
        "fevals": report.fevals,
        "batches": report.batches,
        "method": report.method,
        "seed": report.seed,
        "model_digest": report.model_digest,
        "wall_time_ms": report.wall_time_ms,
    }
    if report.risk_found is not None:
        doc["risk_found"] = {"x": _vector_to_b64(report.risk_found.x),
                             "s_value": report.risk_found.s_value}
    return doc


def report_from_dict(doc: dict) -> QuantReport:
    if doc.get("format_version") != REPORT_FORMAT_VERSION:
        raise ReportFormatError(
            f"unsupported report format_version {doc.get('format_version')!r}")
    ball_doc = doc["ball"]
    ball = NormBall(center=_vector_from_b64(ball_doc["center"]),
                    radius=float(ball_doc["d"]), p=parse_p(ball_doc["p"]))
    risk = None
    if "risk_found" in doc:
        risk = RiskWitness(x=_vector_from_b64(doc["risk_found"]["x"]),
                           s_value=float(doc["risk_found"]["s_value"]))
    return QuantReport(property=property_from_json(doc["property"]), ball=ball,
                       Q_estimate=float(doc["Q_estimate"]),
                       witness=_vector_from_b64(doc["witness"]),
                       s_at_x=float(doc["s_at_x"]),
                       safe_radius=float(doc["d_prime"]),
                       radius_clamped=bool(doc["clamped"]),
                       fevals=int(doc["fevals"]), batches=int(doc["batches"]),
                       method=doc["method"], seed=doc.get("seed"),
                       risk_found=risk, model_digest=doc.get("model_digest"),
                       wall_time_ms=doc.get("wall_time_ms"))


def save_report(report: QuantReport, path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")


def load_report(path) -> QuantReport:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportFormatError(f"cannot read report {path}: {exc}") from None
    return report_from_dict(doc)
