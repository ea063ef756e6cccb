"""Versioned model serialization: JSON manifest plus binary weight payload.

The manifest is human-readable JSON (spec, pipeline snapshot, train
config, history, parameter manifest, SHA-256 of the payload). Weights
live in an adjacent file of raw little-endian float64 values so the
round-trip is bit-exact. Loading is declarative only: nothing in either
file is ever executed.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .baseline import LinearModel
from .errors import ChecksumError, ModelFileError, VersionError
from .models import TrainedModel, check_spec_id
from .netcore.layers import BatchNorm, Dense, Dropout, LayerSpec, Recurrent
from .netcore.network import ModelParams, NetworkSpec, init_params
from .preprocess import pipeline_from_config, pipeline_to_config
from .training import TrainConfig, TrainingHistory

MODEL_FORMAT_VERSION = 1
PAYLOAD_DTYPE = "<f8"


def layer_to_config(layer: LayerSpec) -> dict:
    if isinstance(layer, Recurrent):
        return {"type": "recurrent", "units": layer.units, "bidirectional": layer.bidirectional}
    if isinstance(layer, Dropout):
        return {"type": "dropout", "rate": layer.rate}
    if isinstance(layer, BatchNorm):
        return {"type": "batchnorm", "momentum": layer.momentum, "eps": layer.eps}
    if isinstance(layer, Dense):
        return {"type": "dense", "units": layer.units, "activation": layer.activation}
    raise ModelFileError(f"unserializable layer type {type(layer).__name__}")


def layer_from_config(config: dict) -> LayerSpec:
    kind = config.get("type")
    if kind == "recurrent":
        return Recurrent(units=config["units"], bidirectional=config["bidirectional"])
    if kind == "dropout":
        return Dropout(rate=config["rate"])
    if kind == "batchnorm":
        return BatchNorm(momentum=config["momentum"], eps=config["eps"])
    if kind == "dense":
        return Dense(units=config["units"], activation=config["activation"])
    raise ModelFileError(f"unknown layer type {kind!r} in model file")


def _collect_arrays(trained: TrainedModel) -> list[tuple[str, np.ndarray]]:
    """Deterministic (name, array) sequence defining the payload layout."""
    if trained.kind == "linear":
        return [
            ("linear.w", trained.linear.w),
            ("linear.b", np.array([trained.linear.b])),
        ]
    entries = [(name, arr) for name, arr in trained.params.params.items()]
    entries.extend((f"state.{name}", arr) for name, arr in trained.params.state.items())
    return entries


def _payload_path(manifest_path: Path) -> Path:
    return manifest_path.with_suffix(".bin")


def save_model(trained: TrainedModel, path) -> None:
    """Write <path> (JSON manifest) and the adjacent .bin weight payload."""
    manifest_path = Path(path)
    arrays = _collect_arrays(trained)
    chunks = []
    entries = []
    offset = 0
    for name, arr in arrays:
        raw = np.ascontiguousarray(arr, dtype=np.float64).astype(PAYLOAD_DTYPE).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    manifest = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": trained.kind,
        "spec_id": trained.spec_id,
        "parameters": entries,
        "payload_file": _payload_path(manifest_path).name,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "pipeline": pipeline_to_config(trained.pipeline),
        "train_config": trained.config.to_dict(),
        "history": {
            "train_loss": trained.history.train_loss,
            "val_loss": trained.history.val_loss,
            "lr": trained.history.lr,
            "best_epoch": trained.history.best_epoch,
        },
    }
    if trained.kind == "network":
        manifest["network"] = {
            "n_features": trained.network_spec.n_features,
            "layers": [layer_to_config(layer) for layer in trained.network_spec.layers],
        }
    else:
        manifest["linear"] = {"ridge": trained.linear.ridge}
    _payload_path(manifest_path).write_bytes(payload)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _read_arrays(manifest: dict, payload: bytes) -> dict[str, np.ndarray]:
    total = 0
    for entry in manifest["parameters"]:
        size = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        if entry["offset"] != total:
            raise ModelFileError(
                f"parameter {entry['name']!r} offset {entry['offset']} != expected {total}"
            )
        total += size * 8
    if total != len(payload):
        raise ModelFileError(
            f"payload holds {len(payload)} bytes, manifest declares {total}"
        )
    arrays = {}
    for entry in manifest["parameters"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(
            payload, dtype=PAYLOAD_DTYPE, count=count, offset=entry["offset"]
        )
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
    return arrays


def _check_network_layout(spec: NetworkSpec, arrays: dict[str, np.ndarray]) -> ModelParams:
    """Validate names and shapes against the layout init_params would build."""
    reference = init_params(spec, seed=0)
    expected = {k: v.shape for k, v in reference.params.items()}
    expected.update({f"state.{k}": v.shape for k, v in reference.state.items()})
    actual = {k: v.shape for k, v in arrays.items()}
    if expected != actual:
        missing = sorted(set(expected) - set(actual))
        extra = sorted(set(actual) - set(expected))
        mismatched = sorted(
            k for k in set(expected) & set(actual) if expected[k] != actual[k]
        )
        raise ModelFileError(
            "parameter manifest does not match the declared architecture "
            f"(missing={missing}, extra={extra}, reshaped={mismatched})"
        )
    params = {k: arrays[k] for k in reference.params}
    state = {k: arrays[f"state.{k}"] for k in reference.state}
    return ModelParams(params=params, state=state)


def load_model(path) -> TrainedModel:
    """Reconstruct a TrainedModel saved by save_model, verifying integrity."""
    manifest_path = Path(path)
    if not manifest_path.exists():
        raise ModelFileError(f"model manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"manifest is not valid JSON: {exc}") from exc
    version = manifest.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise VersionError(
            f"unsupported model format_version {version!r}, expected {MODEL_FORMAT_VERSION}"
        )
    try:
        payload_path = manifest_path.parent / manifest["payload_file"]
        if not payload_path.exists():
            raise ModelFileError(f"weight payload not found: {payload_path}")
        payload = payload_path.read_bytes()
        digest = hashlib.sha256(payload).hexdigest()
        if digest != manifest["payload_sha256"]:
            raise ChecksumError(
                f"payload checksum mismatch: file {digest}, manifest "
                f"{manifest['payload_sha256']}"
            )
        arrays = _read_arrays(manifest, payload)
        spec_id = check_spec_id(manifest["spec_id"])
        config = TrainConfig(**manifest["train_config"])
        history = TrainingHistory(
            train_loss=list(manifest["history"]["train_loss"]),
            val_loss=list(manifest["history"]["val_loss"]),
            lr=list(manifest["history"]["lr"]),
            best_epoch=int(manifest["history"]["best_epoch"]),
        )
        pipeline = pipeline_from_config(manifest["pipeline"])
        if manifest["kind"] == "linear":
            w = arrays.get("linear.w")
            b = arrays.get("linear.b")
            if w is None or b is None or w.ndim != 1 or b.shape != (1,):
                raise ModelFileError("linear model payload must hold w (F,) and b (1,)")
            linear = LinearModel(w=w, b=float(b[0]), ridge=manifest["linear"]["ridge"])
            return TrainedModel(
                spec_id=spec_id,
                config=config,
                pipeline=pipeline,
                history=history,
                linear=linear,
            )
        if manifest["kind"] != "network":
            raise ModelFileError(f"unknown model kind {manifest['kind']!r}")
        net_spec = NetworkSpec(
            layers=tuple(layer_from_config(c) for c in manifest["network"]["layers"]),
            n_features=manifest["network"]["n_features"],
        )
        params = _check_network_layout(net_spec, arrays)
        return TrainedModel(
            spec_id=spec_id,
            config=config,
            pipeline=pipeline,
            history=history,
            network_spec=net_spec,
            params=params,
        )
    except KeyError as exc:
        raise ModelFileError(f"manifest is missing required field {exc}") from exc
