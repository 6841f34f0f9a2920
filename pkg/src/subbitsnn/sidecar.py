"""Read the dense sidecar that travels next to a packed model.

Only the pieces inference needs (folded batch-norm, readout, neuron constants)
are read here, with no dependency on the training or quantizer code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .neuron import LifConfig


def sidecar_path(model_path) -> Path:
    """``<stem>.dense.npz`` next to ``<stem>.s2nn``."""
    return Path(model_path).with_suffix(".dense.npz")


@dataclass
class InferenceParams:
    folded: list[tuple[np.ndarray, np.ndarray]] | None
    readout_weight: np.ndarray
    readout_bias: np.ndarray
    lif: LifConfig


def read_inference_params(path) -> InferenceParams:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        n_layers = len(meta["spec"]["convs"])
        folded = None
        if "bn_scale0" in data.files:
            folded = [(data[f"bn_scale{i}"].copy(), data[f"bn_shift{i}"].copy()) for i in range(n_layers)]
        return InferenceParams(folded, data["fc_w"].copy(), data["fc_b"].copy(), LifConfig(**meta["spec"]["lif"]))
