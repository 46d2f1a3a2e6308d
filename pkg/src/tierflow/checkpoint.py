"""Lossless JSON checkpoints for dense networks and VAE models.

Floats are rendered with 17 significant digits, which round-trips float64
exactly: write -> read -> write reproduces the file byte for byte.  Schema::

    {"input_dim": int,
     "layers": [{"rows": int, "cols": int, "activation": str,
                 "weights": [row-major floats], "biases": [floats]}]}

VAE checkpoints wrap four such documents in a ``{"vae": {...}}`` envelope
with keys ``encoder_trunk``, ``mu_head``, ``logvar_head``, ``decoder``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .engine import ACTIVATIONS, DenseLayer, DenseNetwork
from .errors import DataError


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _render(obj, pieces: list[str]) -> None:
    # Minimal JSON writer so float rendering stays under our control.
    if isinstance(obj, dict):
        pieces.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                pieces.append(", ")
            pieces.append(json.dumps(k))
            pieces.append(": ")
            _render(v, pieces)
        pieces.append("}")
    elif isinstance(obj, (list, tuple)):
        pieces.append("[")
        for i, v in enumerate(obj):
            if i:
                pieces.append(", ")
            _render(v, pieces)
        pieces.append("]")
    elif isinstance(obj, bool):
        pieces.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        pieces.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        pieces.append(format_float(obj))
    elif isinstance(obj, str):
        pieces.append(json.dumps(obj))
    elif obj is None:
        pieces.append("null")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    pieces: list[str] = []
    _render(obj, pieces)
    return "".join(pieces)


def network_to_dict(net: DenseNetwork) -> dict:
    return {
        "input_dim": net.input_dim,
        "layers": [
            {
                "rows": layer.weights.shape[0],
                "cols": layer.weights.shape[1],
                "activation": layer.activation,
                "weights": [float(x) for x in layer.weights.ravel()],
                "biases": [float(x) for x in layer.biases],
            }
            for layer in net.layers
        ],
    }


def network_from_dict(doc: dict) -> DenseNetwork:
    try:
        input_dim = int(doc["input_dim"])
        layers = []
        for entry in doc["layers"]:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            act = entry["activation"]
            if act not in ACTIVATIONS:
                raise DataError(f"unknown activation {act!r} in checkpoint")
            w = np.asarray(entry["weights"], dtype=np.float64)
            if w.size != rows * cols:
                raise DataError(
                    f"layer declares {rows}x{cols} but carries {w.size} weights"
                )
            b = np.asarray(entry["biases"], dtype=np.float64)
            layers.append(DenseLayer(w.reshape(rows, cols), b, act))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed checkpoint: {exc}") from exc
    return DenseNetwork(layers, input_dim)


def save_network(net: DenseNetwork, path: str | Path) -> None:
    Path(path).write_text(dumps(network_to_dict(net)) + "\n", encoding="utf-8")


def load_network(path: str | Path) -> DenseNetwork:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    return network_from_dict(doc)
